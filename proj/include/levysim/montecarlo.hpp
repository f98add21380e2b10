#pragma once

// Ensemble driver and empirical-moment statistics.
//
// Paths are streamed, never materialized: each worker walks blocks of 1024
// consecutive path indices, accumulating compensated partial sums, and the
// partials are folded into the global accumulators in strict block order.
// The fold order, the per-path substreams, and the compensated arithmetic
// together make every report bit-identical across runs and worker counts.
//
// Non-finite paths are a measurement, not an error: a path is censored from
// its first bad index onward and tallied in the census, matching the
// separation of the NaN column from the moment columns in the tables.

#include "schemes.hpp"

#include <atomic>
#include <condition_variable>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace levysim {

namespace detail {

// Neumaier's compensated sum: error-free for each add, immune to the
// cancellation case Kahan misses (|v| > |s|).
struct CompSum {
    double s = 0.0, c = 0.0;

    void add(double v) {
        const double t = s + v;
        c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
        s = t;
    }

    // folding partials in a fixed order keeps the reduction deterministic
    void add(const CompSum& o) {
        add(o.s);
        add(o.c);
    }

    double total() const { return s + c; }
};

inline double norm_of(const double* x, int dim) {
    if (dim == 1) return std::abs(x[0]);
    double s = 0;
    for (int i = 0; i < dim; ++i) s += x[i] * x[i];
    return std::sqrt(s);
}

// ||x||^p via exp(p log ||x||), guarded at 0 (p > 0 throughout this library)
inline double pow_norm(double norm, double p) {
    return norm == 0.0 ? 0.0 : std::exp(p * std::log(norm));
}

} // namespace detail

// Snap a time window [t_lo, t_hi] to grid indices [ceil(t_lo/h), floor(t_hi/h)],
// with a relative guard so that endpoints intended to lie on the grid are not
// pushed off it by division rounding.
inline std::pair<long, long> snap_window(double t_lo, double t_hi, const Grid& grid) {
    if (!(t_lo >= 0) || !(t_hi <= grid.T * (1 + 1e-12)) || !(t_lo <= t_hi))
        throw std::invalid_argument("window must satisfy 0 <= t_lo <= t_hi <= T");
    const long k_lo = static_cast<long>(std::ceil(t_lo / grid.h - 1e-9));
    const long k_hi = std::min(static_cast<long>(std::floor(t_hi / grid.h + 1e-9)), grid.n);
    if (k_lo > k_hi) throw std::invalid_argument("window is empty after snapping to the grid");
    return {std::max(k_lo, 0L), k_hi};
}

struct EnsembleConfig {
    SdeModel model;
    SchemeKind scheme = SchemeKind::Splitting;
    double T = 1.0;
    long n = 100;
    long N_paths = 1000;
    std::vector<double> x0;          // empty means the origin
    std::uint64_t master_seed = 0;
    std::vector<double> exponents{0.5, 1.0, 1.5, 2.0, 2.5};
    std::optional<std::pair<double, double>> window; // time units
    int workers = 1;
};

struct MomentStat {
    double exponent = 0;
    double value = 0;
    double std_error = 0;
};

struct WindowStat {
    double exponent = 0;
    double value = 0;      // max over window indices of the per-index mean
    double std_error = 0;  // standard error at the attaining index
    long argmax_index = -1;
};

struct MomentReport {
    std::vector<MomentStat> terminal;
    std::vector<WindowStat> window_max; // empty when no window was requested
    long N_paths = 0;
    long nan_count = 0;             // paths that went NaN/Inf
    long flow_divergence_count = 0; // paths whose numeric flow gave up
    double nan_fraction = 0.0;
    long N_effective_terminal = 0;  // paths finite through the terminal index
    long window_k_lo = -1, window_k_hi = -1;
};

namespace detail {

constexpr long kPathBlock = 1024;

struct BlockPartial {
    long n_paths = 0;
    long nan_count = 0;
    long flowdiv_count = 0;
    long terminal_finite = 0;
    std::vector<CompSum> term_sum, term_sum2;      // [n_exp]
    std::vector<CompSum> win_sum, win_sum2;        // [win_len * n_exp]
    std::vector<long> win_count;                   // [win_len]

    void init(std::size_t n_exp, std::size_t win_len) {
        n_paths = nan_count = flowdiv_count = terminal_finite = 0;
        term_sum.assign(n_exp, {});
        term_sum2.assign(n_exp, {});
        win_sum.assign(win_len * n_exp, {});
        win_sum2.assign(win_len * n_exp, {});
        win_count.assign(win_len, 0);
    }

    void merge_from(const BlockPartial& p) {
        n_paths += p.n_paths;
        nan_count += p.nan_count;
        flowdiv_count += p.flowdiv_count;
        terminal_finite += p.terminal_finite;
        for (std::size_t i = 0; i < term_sum.size(); ++i) {
            term_sum[i].add(p.term_sum[i]);
            term_sum2[i].add(p.term_sum2[i]);
        }
        for (std::size_t i = 0; i < win_sum.size(); ++i) {
            win_sum[i].add(p.win_sum[i]);
            win_sum2[i].add(p.win_sum2[i]);
        }
        for (std::size_t i = 0; i < win_count.size(); ++i) win_count[i] += p.win_count[i];
    }
};

// Accepts finished block partials in any order, folds them strictly in block
// index order via Partial::merge_from. The wait keeps a slow consumer from
// buffering unboundedly many finished blocks.
template <class Partial>
class OrderedFoldT {
public:
    explicit OrderedFoldT(Partial initial) : global_(std::move(initial)) {}

    void submit(long block_index, Partial&& partial) {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return pending_.size() < 256; });
        pending_.emplace(block_index, std::move(partial));
        while (!pending_.empty() && pending_.begin()->first == next_) {
            global_.merge_from(pending_.begin()->second);
            pending_.erase(pending_.begin());
            ++next_;
        }
        cv_.notify_all();
    }

    const Partial& result() const { return global_; }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::map<long, Partial> pending_;
    long next_ = 0;
    Partial global_;
};

inline MomentStat finish_stat(double exponent, const CompSum& sum, const CompSum& sum2,
                              long count) {
    MomentStat stat;
    stat.exponent = exponent;
    if (count <= 0) return stat;
    const double mean = sum.total() / static_cast<double>(count);
    const double mean2 = sum2.total() / static_cast<double>(count);
    const double var = std::max(mean2 - mean * mean, 0.0);
    stat.value = mean;
    stat.std_error = std::sqrt(var / static_cast<double>(count));
    return stat;
}

} // namespace detail

inline MomentReport run_ensemble(const EnsembleConfig& config) {
    config.model.validate();
    if (config.N_paths < 1) throw std::invalid_argument("run_ensemble: N_paths must be >= 1");
    if (config.workers < 1) throw std::invalid_argument("run_ensemble: workers must be >= 1");
    for (double p : config.exponents)
        if (!(p > 0)) throw std::invalid_argument("run_ensemble: exponents must be positive");

    const Grid grid(config.T, config.n);
    std::vector<double> x0 = config.x0;
    if (x0.empty()) x0.assign(config.model.dim, 0.0);
    if (x0.size() != static_cast<std::size_t>(config.model.dim))
        throw std::invalid_argument("run_ensemble: x0 dimension mismatch");

    long k_lo = -1, k_hi = -2;
    if (config.window) std::tie(k_lo, k_hi) = snap_window(config.window->first,
                                                          config.window->second, grid);
    const std::size_t win_len = config.window ? static_cast<std::size_t>(k_hi - k_lo + 1) : 0;
    const std::size_t n_exp = config.exponents.size();

    detail::BlockPartial zero;
    zero.init(n_exp, win_len);
    detail::OrderedFoldT<detail::BlockPartial> fold(std::move(zero));
    const long n_blocks =
        (config.N_paths + detail::kPathBlock - 1) / detail::kPathBlock;
    std::atomic<long> next_block{0};

    const auto worker_main = [&]() {
        NoiseGrid noise;
        detail::BlockPartial partial;
        std::vector<double> powers(n_exp);

        for (;;) {
            const long b = next_block.fetch_add(1, std::memory_order_relaxed);
            if (b >= n_blocks) return;
            const long first = b * detail::kPathBlock;
            const long last = std::min(first + detail::kPathBlock, config.N_paths);
            partial.init(n_exp, win_len);
            partial.n_paths = last - first;

            for (long path = first; path < last; ++path) {
                fill_noise_grid(config.model.noise, config.master_seed,
                                static_cast<std::uint64_t>(path), grid.n, grid.h, noise);
                const auto visit = [&](long k, const double* x) {
                    const bool in_window = win_len > 0 && k >= k_lo && k <= k_hi;
                    const bool at_terminal = k == grid.n;
                    if (!in_window && !at_terminal) return;
                    const double norm = detail::norm_of(x, config.model.dim);
                    for (std::size_t e = 0; e < n_exp; ++e)
                        powers[e] = detail::pow_norm(norm, config.exponents[e]);
                    if (in_window) {
                        const std::size_t j = static_cast<std::size_t>(k - k_lo);
                        ++partial.win_count[j];
                        for (std::size_t e = 0; e < n_exp; ++e) {
                            partial.win_sum[j * n_exp + e].add(powers[e]);
                            partial.win_sum2[j * n_exp + e].add(powers[e] * powers[e]);
                        }
                    }
                    if (at_terminal) {
                        ++partial.terminal_finite;
                        for (std::size_t e = 0; e < n_exp; ++e) {
                            partial.term_sum[e].add(powers[e]);
                            partial.term_sum2[e].add(powers[e] * powers[e]);
                        }
                    }
                };
                const auto outcome =
                    run_path_visit(config.model, config.scheme, grid, noise, x0.data(), visit);
                if (outcome.status == PathStatus::NonFinite) ++partial.nan_count;
                if (outcome.status == PathStatus::FlowDiverged) ++partial.flowdiv_count;
            }
            fold.submit(b, std::move(partial));
        }
    };

    if (config.workers == 1) {
        worker_main();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(config.workers);
        for (int w = 0; w < config.workers; ++w) pool.emplace_back(worker_main);
        for (auto& t : pool) t.join();
    }

    const detail::BlockPartial& g = fold.result();
    MomentReport report;
    report.N_paths = config.N_paths;
    report.nan_count = g.nan_count;
    report.flow_divergence_count = g.flowdiv_count;
    report.nan_fraction = static_cast<double>(g.nan_count) / static_cast<double>(config.N_paths);
    report.N_effective_terminal = g.terminal_finite;
    report.window_k_lo = config.window ? k_lo : -1;
    report.window_k_hi = config.window ? k_hi : -1;

    for (std::size_t e = 0; e < n_exp; ++e)
        report.terminal.push_back(detail::finish_stat(config.exponents[e], g.term_sum[e],
                                                      g.term_sum2[e], g.terminal_finite));

    for (std::size_t e = 0; e < n_exp; ++e) {
        WindowStat ws;
        ws.exponent = config.exponents[e];
        for (std::size_t j = 0; j < win_len; ++j) {
            const auto stat = detail::finish_stat(config.exponents[e], g.win_sum[j * n_exp + e],
                                                  g.win_sum2[j * n_exp + e], g.win_count[j]);
            if (g.win_count[j] > 0 && (ws.argmax_index < 0 || stat.value > ws.value)) {
                ws.value = stat.value;
                ws.std_error = stat.std_error;
                ws.argmax_index = k_lo + static_cast<long>(j);
            }
        }
        if (win_len > 0) report.window_max.push_back(ws);
    }
    return report;
}

// --- small-sample statistics over materialized data -------------------------

inline std::vector<std::pair<double, double>>
empirical_moments(const std::vector<std::vector<double>>& samples,
                  const std::vector<double>& exponents) {
    if (samples.empty()) throw std::invalid_argument("empirical_moments: no samples");
    std::vector<std::pair<double, double>> out;
    out.reserve(exponents.size());
    const auto N = static_cast<double>(samples.size());
    for (double p : exponents) {
        detail::CompSum sum, sum2;
        for (const auto& x : samples) {
            const double v =
                detail::pow_norm(detail::norm_of(x.data(), static_cast<int>(x.size())), p);
            sum.add(v);
            sum2.add(v * v);
        }
        const double mean = sum.total() / N;
        const double var = std::max(sum2.total() / N - mean * mean, 0.0);
        out.emplace_back(mean, std::sqrt(var / N));
    }
    return out;
}

// Max over window grid indices of the per-index ensemble moment; paths are
// excluded from an index where they are no longer finite.
inline std::vector<double> window_max_moments(const std::vector<Trajectory>& trajectories,
                                              const Grid& grid,
                                              std::pair<double, double> window,
                                              const std::vector<double>& exponents) {
    const auto [k_lo, k_hi] = snap_window(window.first, window.second, grid);
    // per-index moments are nonnegative, so 0 is a neutral starting maximum
    std::vector<double> best(exponents.size(), 0.0);
    for (long k = k_lo; k <= k_hi; ++k) {
        std::vector<detail::CompSum> sums(exponents.size());
        long count = 0;
        for (const auto& traj : trajectories) {
            if (traj.status != PathStatus::Ok && traj.first_bad_index <= k) continue;
            if (k >= traj.n_states()) continue;
            const double norm = detail::norm_of(traj.state(k), traj.dim);
            for (std::size_t e = 0; e < exponents.size(); ++e)
                sums[e].add(detail::pow_norm(norm, exponents[e]));
            ++count;
        }
        for (std::size_t e = 0; e < exponents.size() && count > 0; ++e)
            best[e] = std::max(best[e], sums[e].total() / static_cast<double>(count));
    }
    return best;
}

struct ExpMomentEstimate {
    double value = 1.0;
    double std_error = 0.0;
    bool diverged = false; // some sample overflowed exp: the lambda >= Lambda regime
};

// Ensemble mean of exp(lambda/(1+kappa) ||x||^{1+kappa}).
inline ExpMomentEstimate exp_moment_estimate(const std::vector<std::vector<double>>& samples,
                                             double lambda_exp, double kappa) {
    if (samples.empty()) throw std::invalid_argument("exp_moment_estimate: no samples");
    if (lambda_exp < 0) throw std::invalid_argument("exp_moment_estimate: lambda must be >= 0");
    detail::CompSum sum, sum2;
    bool diverged = false;
    const double scale = lambda_exp / (1.0 + kappa);
    for (const auto& x : samples) {
        const double norm = detail::norm_of(x.data(), static_cast<int>(x.size()));
        const double v = std::exp(scale * detail::pow_norm(norm, 1.0 + kappa));
        if (std::isinf(v)) diverged = true;
        sum.add(v);
        sum2.add(v * v);
    }
    ExpMomentEstimate est;
    est.diverged = diverged;
    const auto N = static_cast<double>(samples.size());
    if (diverged) {
        est.value = std::numeric_limits<double>::infinity();
        est.std_error = std::numeric_limits<double>::infinity();
        return est;
    }
    est.value = sum.total() / N;
    const double var = std::max(sum2.total() / N - est.value * est.value, 0.0);
    est.std_error = std::sqrt(var / N);
    return est;
}

} // namespace levysim
