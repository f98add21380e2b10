#pragma once

// Text emission shared by the CLI and the demos: shortest round-trip numeric
// formatting and a minimal CSV writer.  Everything here is deterministic by
// construction -- no locale, no timestamps, no pointer-dependent ordering --
// so identical runs produce byte-identical payloads.

#include <charconv>
#include <ostream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace levysim {

// Shortest decimal string that from_chars reads back to the same double;
// non-finite values print as inf/-inf/nan, which from_chars also accepts.
inline std::string format_double(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    if (r.ec != std::errc()) throw std::runtime_error("format_double: to_chars failed");
    return std::string(buf, r.ptr);
}

inline std::string format_int(long long v) {
    char buf[24];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline std::string format_uint(unsigned long long v) {
    char buf[24];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

// RFC-4180-ish row: cells are quoted only when they contain a delimiter,
// which numeric payloads never do.
inline void csv_row(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os << ',';
        const std::string& c = cells[i];
        if (c.find_first_of(",\"\n") != std::string::npos) {
            os << '"';
            for (char ch : c) {
                if (ch == '"') os << '"';
                os << ch;
            }
            os << '"';
        } else {
            os << c;
        }
    }
    os << '\n';
}

} // namespace levysim
