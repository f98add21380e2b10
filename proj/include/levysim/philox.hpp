#pragma once

// Counter-based RNG core: Philox4x64-10.
//
// Every random number in the library is a pure function of
// (master_seed, path_index, step_index, channel, lane): the first two key
// words select the stream, the four counter words address a 256-bit cell.
// Workers can therefore generate any path's noise in any order and always
// reproduce the same bits.  The block function is verified in the test
// suite against the published Random123 vectors and against numpy's
// Philox bit generator.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace levysim {

struct PhiloxBlock {
    std::uint64_t v[4];
};

struct PhiloxKey {
    std::uint64_t v[2];
};

namespace detail {

inline std::uint64_t mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t* hi) {
    const auto prod = static_cast<__uint128_t>(a) * b;
    *hi = static_cast<std::uint64_t>(prod >> 64);
    return static_cast<std::uint64_t>(prod);
}

inline PhiloxBlock philox_round(PhiloxBlock c, PhiloxKey k) {
    std::uint64_t hi0, hi1;
    const std::uint64_t lo0 = mulhilo64(0xD2E7470EE14C6C93ULL, c.v[0], &hi0);
    const std::uint64_t lo1 = mulhilo64(0xCA5A826395121157ULL, c.v[2], &hi1);
    return PhiloxBlock{{hi1 ^ c.v[1] ^ k.v[0], lo1, hi0 ^ c.v[3] ^ k.v[1], lo0}};
}

} // namespace detail

inline PhiloxBlock philox4x64_10(PhiloxBlock ctr, PhiloxKey key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key.v[0] += 0x9E3779B97F4A7C15ULL; // Weyl constants of the reference
            key.v[1] += 0xBB67AE8584CAA73BULL; // implementation
        }
        ctr = detail::philox_round(ctr, key);
    }
    return ctr;
}

enum class Channel : std::uint64_t { Brownian = 0, Levy = 1, Auxiliary = 2 };

// Addresses one generation cell.  Distinct (path_index, step_index, channel)
// under the same master_seed give independent draws; identical keys give
// bit-identical draws.
struct StreamKey {
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
    std::uint64_t step_index = 0;
    Channel channel = Channel::Brownian;
};

// Buffered stream of u64 words / variates from one cell.  The fourth counter
// word is the lane index, so a cell can supply arbitrarily many words
// (needed e.g. for compound-Poisson steps with a random jump count).
class CellRng {
public:
    explicit CellRng(const StreamKey& key)
        : key_{{key.master_seed, kKeySalt}},
          ctr_{{key.path_index, key.step_index,
                static_cast<std::uint64_t>(key.channel), 0}} {}

    std::uint64_t next_u64() {
        if (pos_ == 4) refill();
        return buf_.v[pos_++];
    }

    // Uniform on the open interval (0,1): never returns 0 or 1, so tan/log
    // transforms downstream stay finite by construction.
    double next_uniform() {
        const std::uint64_t w = next_u64();
        return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the spare variate is cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Standard exponential.
    double next_exponential() { return -std::log(next_uniform()); }

private:
    // Arbitrary fixed salt (binary digits of pi) so that a zero master seed
    // still keys a nontrivial stream.
    static constexpr std::uint64_t kKeySalt = 0x243F6A8885A308D3ULL;

    void refill() {
        buf_ = philox4x64_10(ctr_, key_);
        ++ctr_.v[3]; // advance the lane; 2^64 blocks per cell is plenty
        pos_ = 0;
    }

    PhiloxKey key_;
    PhiloxBlock ctr_;
    PhiloxBlock buf_{};
    int pos_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace levysim
