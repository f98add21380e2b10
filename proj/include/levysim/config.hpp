#pragma once

// One declarative configuration drives every CLI subcommand.  The on-disk
// format is a small INI dialect -- [section] headers, key = value lines,
// '#' or ';' comments -- resolved into a single ExperimentConfig.  Flags
// override fields after the file is read, resolve() finalizes derived
// quantities (a requested step size h becomes the step count n) and checks
// the cheap invariants, and serialize_config() writes the resolved state
// back out as text that parses to the same configuration: the sidecar echo
// a run can be repeated from.  Parse errors carry file:line and the field
// name; the CLI maps ConfigError to exit code 2.

#include "analysis.hpp"
#include "io.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace levysim {

// malformed or contradictory configuration; distinct from runtime failures
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string cfg_trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double cfg_double(const std::string& v, const std::string& where) {
    double out = 0;
    const char* first = v.data();
    const char* last = v.data() + v.size();
    const auto r = std::from_chars(first, last, out);
    if (r.ec != std::errc() || r.ptr != last)
        throw ConfigError(where + ": expected a number, got '" + v + "'");
    return out;
}

inline long cfg_long(const std::string& v, const std::string& where) {
    long long out = 0;
    const char* last = v.data() + v.size();
    const auto r = std::from_chars(v.data(), last, out);
    if (r.ec != std::errc() || r.ptr != last)
        throw ConfigError(where + ": expected an integer, got '" + v + "'");
    return static_cast<long>(out);
}

inline std::uint64_t cfg_uint(const std::string& v, const std::string& where) {
    unsigned long long out = 0;
    const char* last = v.data() + v.size();
    const auto r = std::from_chars(v.data(), last, out);
    if (r.ec != std::errc() || r.ptr != last)
        throw ConfigError(where + ": expected a nonnegative integer, got '" + v + "'");
    return out;
}

inline std::vector<std::string> cfg_split(const std::string& v) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = v.find(',', pos);
        parts.push_back(cfg_trim(v.substr(pos, comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return parts;
}

inline std::vector<double> cfg_double_list(const std::string& v, const std::string& where) {
    std::vector<double> out;
    for (const auto& part : cfg_split(v)) out.push_back(cfg_double(part, where));
    return out;
}

inline std::vector<long> cfg_long_list(const std::string& v, const std::string& where) {
    std::vector<long> out;
    for (const auto& part : cfg_split(v)) out.push_back(cfg_long(part, where));
    return out;
}

template <typename T, typename Fmt>
std::string cfg_join(const std::vector<T>& xs, Fmt fmt) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += fmt(xs[i]);
    }
    return out;
}

} // namespace detail

struct ExperimentConfig {
    // [model]
    std::string model_name = "cauchy_cubic";
    std::map<std::string, double> model_params;

    // [run] -- one ensemble; h and n are two views of the same field and
    // resolve() folds a given h into n = round(T/h)
    std::string scheme = "splitting";
    double T = 1.0;
    double h = 0.0; // 0 means "derive from n"
    long n = 0;     // 0 means "derive from h, or fall back to 100"
    long N_paths = 1000;
    std::uint64_t master_seed = 0;
    std::vector<double> x0; // empty means the origin
    std::vector<double> exponents{0.5, 1.0, 1.5, 2.0, 2.5};
    bool has_window = false;
    double window_lo = 0.0, window_hi = 0.0;
    int workers = 0; // 0: $LEVYSIM_WORKERS, else 1

    // [table]
    std::vector<double> h_list{1e-2, 1e-3, 1e-4, 1e-5};
    double scale = 1.0; // path count = round(1e7 * scale)

    // [converge]
    double q = 1.0;
    std::vector<long> n_list{64, 128, 256, 512, 1024, 2048, 4096};
    long n_ref = 32768;
    std::string error_mode = "mean_of_sup";
    double rate_p = 0.99; // moment order fed to the slope predictions

    // [rates] -- defaults are the worked example
    double rates_p = 1.0;
    double rates_q = 0.5;
    double rates_kappa = 3.0;
    double rates_chi = 2.0;
    double rates_p_X = 2.0;
    double rates_C_diss = 1.0;
    double rates_b_sup = 1.0;

    // [output]
    std::string out_dir = ".";
    std::string prefix; // empty: the subcommand picks its own
    std::string format = "csv";

    // [budget] -- estimated steps x paths a Monte Carlo row may cost; <= 0 disables
    double max_steps = 1e10;

    int resolved_workers() const {
        if (workers > 0) return workers;
        if (const char* env = std::getenv("LEVYSIM_WORKERS")) {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (end && *end == '\0' && v >= 1 && v <= 4096) return static_cast<int>(v);
        }
        return 1;
    }

    // Finalize derived fields and reject contradictions cheap enough to see
    // here; model- and run-dependent checks stay with the runners.
    void resolve() {
        if (!(T > 0) || !std::isfinite(T)) throw ConfigError("run.T: must be positive and finite");
        if (h < 0 || !std::isfinite(h)) throw ConfigError("run.h: must be positive and finite");
        if (h > 0) {
            if (n > 0) throw ConfigError("run: give either h or n, not both");
            const double steps = T / h;
            if (!(steps >= 0.5)) throw ConfigError("run.h: exceeds the horizon T");
            if (steps > 9.0e15) throw ConfigError("run.h: step count overflows");
            n = std::llround(steps);
            h = 0.0;
        }
        if (n == 0) n = 100;
        if (n < 1) throw ConfigError("run.n: must be >= 1");
        if (N_paths < 1) throw ConfigError("run.N_paths: must be >= 1");
        if (exponents.empty()) throw ConfigError("run.exponents: must be nonempty");
        for (double p : exponents)
            if (!(p > 0) || !std::isfinite(p))
                throw ConfigError("run.exponents: entries must be positive");
        if (workers < 0) throw ConfigError("run.workers: must be >= 1, or 0 for the default");
        if (has_window && !(window_lo >= 0 && window_hi >= window_lo && window_hi <= T))
            throw ConfigError("run.window: need 0 <= lo <= hi <= T");
        try {
            parse_scheme(scheme);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("run.scheme: ") + e.what());
        }
        if (h_list.empty()) throw ConfigError("table.h_list: must be nonempty");
        for (double v : h_list)
            if (!(v > 0) || !std::isfinite(v))
                throw ConfigError("table.h_list: entries must be positive");
        if (!(scale > 0) || scale > 1) throw ConfigError("table.scale: must lie in (0, 1]");
        if (!(q > 0) || !std::isfinite(q)) throw ConfigError("converge.q: must be positive");
        if (n_list.empty()) throw ConfigError("converge.n_list: must be nonempty");
        for (long v : n_list)
            if (v < 1) throw ConfigError("converge.n_list: entries must be >= 1");
        if (n_ref < 1) throw ConfigError("converge.n_ref: must be >= 1");
        if (error_mode != "sup_of_mean" && error_mode != "mean_of_sup")
            throw ConfigError("converge.mode: expected sup_of_mean or mean_of_sup");
        if (!(rate_p > 0)) throw ConfigError("converge.p: must be positive");
        if (format != "csv") throw ConfigError("output.format: only 'csv' is supported");
    }

    SdeModel make_model() const { return make_builtin_model(model_name, model_params); }

    EnsembleConfig to_ensemble(SdeModel model) const {
        EnsembleConfig e;
        e.model = std::move(model);
        e.scheme = parse_scheme(scheme);
        e.T = T;
        e.n = n;
        e.N_paths = N_paths;
        e.x0 = x0;
        e.master_seed = master_seed;
        e.exponents = exponents;
        if (has_window) e.window = std::make_pair(window_lo, window_hi);
        e.workers = resolved_workers();
        return e;
    }

    StrongErrorConfig to_strong_error(SdeModel model) const {
        StrongErrorConfig s;
        s.model = std::move(model);
        s.scheme = parse_scheme(scheme);
        s.q = q;
        s.n_list = n_list;
        s.n_ref = n_ref;
        s.N_paths = N_paths;
        s.T = T;
        s.x0 = x0;
        s.master_seed = master_seed;
        s.mode = parse_error_mode(error_mode);
        s.workers = resolved_workers();
        return s;
    }
};

inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::string& origin = "<config>") {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    long lineno = 0;
    bool saw_h = false, saw_n = false;

    static const std::vector<std::string> known_sections{
        "model", "run", "table", "converge", "rates", "output", "budget"};

    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        const std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line.erase(comment);
        line = detail::cfg_trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + ": unterminated section header '" + line + "'");
            section = detail::cfg_trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const auto& s : known_sections) known = known || s == section;
            if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        const std::string key = detail::cfg_trim(line.substr(0, eq));
        const std::string value = detail::cfg_trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (section.empty()) throw ConfigError(where + ": key '" + key + "' before any [section]");
        const std::string field = where + ": " + section + "." + key;

        if (section == "model") {
            if (key == "name") cfg.model_name = value;
            else cfg.model_params[key] = detail::cfg_double(value, field);
        } else if (section == "run") {
            if (key == "scheme") cfg.scheme = value;
            else if (key == "T") cfg.T = detail::cfg_double(value, field);
            else if (key == "h") { cfg.h = detail::cfg_double(value, field); saw_h = true; }
            else if (key == "n") { cfg.n = detail::cfg_long(value, field); saw_n = true; }
            else if (key == "N_paths") cfg.N_paths = detail::cfg_long(value, field);
            else if (key == "master_seed") cfg.master_seed = detail::cfg_uint(value, field);
            else if (key == "x0") cfg.x0 = detail::cfg_double_list(value, field);
            else if (key == "exponents") cfg.exponents = detail::cfg_double_list(value, field);
            else if (key == "window") {
                const auto w = detail::cfg_double_list(value, field);
                if (w.size() != 2) throw ConfigError(field + ": expected 'lo,hi'");
                cfg.window_lo = w[0];
                cfg.window_hi = w[1];
                cfg.has_window = true;
            } else if (key == "workers") cfg.workers = static_cast<int>(detail::cfg_long(value, field));
            else throw ConfigError(field + ": unknown key");
        } else if (section == "table") {
            if (key == "h_list") cfg.h_list = detail::cfg_double_list(value, field);
            else if (key == "scale") cfg.scale = detail::cfg_double(value, field);
            else throw ConfigError(field + ": unknown key");
        } else if (section == "converge") {
            if (key == "q") cfg.q = detail::cfg_double(value, field);
            else if (key == "n_list") cfg.n_list = detail::cfg_long_list(value, field);
            else if (key == "n_ref") cfg.n_ref = detail::cfg_long(value, field);
            else if (key == "mode") cfg.error_mode = value;
            else if (key == "p") cfg.rate_p = detail::cfg_double(value, field);
            else throw ConfigError(field + ": unknown key");
        } else if (section == "rates") {
            if (key == "p") cfg.rates_p = detail::cfg_double(value, field);
            else if (key == "q") cfg.rates_q = detail::cfg_double(value, field);
            else if (key == "kappa") cfg.rates_kappa = detail::cfg_double(value, field);
            else if (key == "chi") cfg.rates_chi = detail::cfg_double(value, field);
            else if (key == "p_X") cfg.rates_p_X = detail::cfg_double(value, field);
            else if (key == "C_diss") cfg.rates_C_diss = detail::cfg_double(value, field);
            else if (key == "b_sup") cfg.rates_b_sup = detail::cfg_double(value, field);
            else throw ConfigError(field + ": unknown key");
        } else if (section == "output") {
            if (key == "dir") cfg.out_dir = value;
            else if (key == "prefix") cfg.prefix = value;
            else if (key == "format") cfg.format = value;
            else throw ConfigError(field + ": unknown key");
        } else { // budget
            if (key == "max_steps") cfg.max_steps = detail::cfg_double(value, field);
            else throw ConfigError(field + ": unknown key");
        }
    }
    if (saw_h && saw_n) throw ConfigError(origin + ": give either run.h or run.n, not both");
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

// Inverse of parse_config_text on resolved configurations: the output parses
// back to an ExperimentConfig with identical fields (maps are emitted in key
// order, numbers in shortest round-trip form).
inline std::string serialize_config(const ExperimentConfig& c) {
    const auto fd = [](double v) { return format_double(v); };
    const auto fl = [](long v) { return format_int(v); };
    std::ostringstream out;
    out << "[model]\n";
    out << "name = " << c.model_name << "\n";
    for (const auto& [k, v] : c.model_params) out << k << " = " << fd(v) << "\n";
    out << "\n[run]\n";
    out << "scheme = " << c.scheme << "\n";
    out << "T = " << fd(c.T) << "\n";
    if (c.h > 0) out << "h = " << fd(c.h) << "\n";
    else out << "n = " << fl(c.n) << "\n";
    out << "N_paths = " << fl(c.N_paths) << "\n";
    out << "master_seed = " << format_uint(c.master_seed) << "\n";
    if (!c.x0.empty()) out << "x0 = " << detail::cfg_join(c.x0, fd) << "\n";
    out << "exponents = " << detail::cfg_join(c.exponents, fd) << "\n";
    if (c.has_window) out << "window = " << fd(c.window_lo) << "," << fd(c.window_hi) << "\n";
    out << "workers = " << c.workers << "\n";
    out << "\n[table]\n";
    out << "h_list = " << detail::cfg_join(c.h_list, fd) << "\n";
    out << "scale = " << fd(c.scale) << "\n";
    out << "\n[converge]\n";
    out << "q = " << fd(c.q) << "\n";
    out << "n_list = " << detail::cfg_join(c.n_list, fl) << "\n";
    out << "n_ref = " << fl(c.n_ref) << "\n";
    out << "mode = " << c.error_mode << "\n";
    out << "p = " << fd(c.rate_p) << "\n";
    out << "\n[rates]\n";
    out << "p = " << fd(c.rates_p) << "\n";
    out << "q = " << fd(c.rates_q) << "\n";
    out << "kappa = " << fd(c.rates_kappa) << "\n";
    out << "chi = " << fd(c.rates_chi) << "\n";
    out << "p_X = " << fd(c.rates_p_X) << "\n";
    out << "C_diss = " << fd(c.rates_C_diss) << "\n";
    out << "b_sup = " << fd(c.rates_b_sup) << "\n";
    out << "\n[output]\n";
    out << "dir = " << c.out_dir << "\n";
    if (!c.prefix.empty()) out << "prefix = " << c.prefix << "\n";
    out << "format = " << c.format << "\n";
    out << "\n[budget]\n";
    out << "max_steps = " << fd(c.max_steps) << "\n";
    return out.str();
}

} // namespace levysim
