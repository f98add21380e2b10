#pragma once

// Brownian and Levy increments on uniform grids.
//
// All samplers are exact-law transforms of open-interval uniforms (no
// acceptance-rejection), so a StreamKey fully determines the output bits.
// NoiseGrid carries provenance to its base grid: aggregating twice and
// aggregating once by the product ratio re-sum the *same* base increments in
// the same order and therefore agree bitwise, which the coupled strong-error
// study relies on.

#include "philox.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace levysim {

enum class LevyKind { None, Cauchy, SymmetricAlphaStable, CompoundPoisson };

struct NoiseSpec {
    int brownian_dim = 0;
    LevyKind levy_kind = LevyKind::None;
    int levy_dim = 0;
    double alpha = 1.0;        // stable index, used by SymmetricAlphaStable
    double cp_rate = 1.0;      // jump intensity, used by CompoundPoisson
    std::string jump_sampler_id = "pareto:2.5";
    double p_moment = 0.99;    // the p of the finite-moment hypothesis

    void validate() const {
        if (brownian_dim < 0 || levy_dim < 0)
            throw std::invalid_argument("NoiseSpec: negative dimension");
        if (brownian_dim + levy_dim < 1)
            throw std::invalid_argument("NoiseSpec: needs at least one noise channel");
        if (p_moment <= 0)
            throw std::invalid_argument("NoiseSpec: p_moment must be positive");
        switch (levy_kind) {
        case LevyKind::None:
            if (levy_dim != 0)
                throw std::invalid_argument("NoiseSpec: levy_dim > 0 with levy_kind None");
            break;
        case LevyKind::Cauchy:
            if (p_moment >= 1.0)
                throw std::invalid_argument("NoiseSpec: Cauchy requires p_moment < 1");
            break;
        case LevyKind::SymmetricAlphaStable:
            if (!(alpha > 0.0 && alpha < 2.0))
                throw std::invalid_argument("NoiseSpec: alpha must lie in (0,2)");
            if (p_moment >= alpha)
                throw std::invalid_argument("NoiseSpec: stable requires p_moment < alpha");
            break;
        case LevyKind::CompoundPoisson:
            if (!(cp_rate > 0.0))
                throw std::invalid_argument("NoiseSpec: cp_rate must be positive");
            break;
        }
    }
};

// Per-path increments on a uniform grid, row-major [n_steps][dim].
struct NoiseGrid {
    long n_steps = 0;
    double h = 0.0;
    int brownian_dim = 0;
    int levy_dim = 0;
    std::vector<double> dB;
    std::vector<double> dZ;

    // Provenance: the grid these increments were aggregated from (null for a
    // freshly generated grid) and the cumulative step ratio to it.
    std::shared_ptr<const NoiseGrid> base;
    long ratio_from_base = 1;

    const double* dB_row(long k) const { return dB.data() + k * brownian_dim; }
    const double* dZ_row(long k) const { return dZ.data() + k * levy_dim; }
};

// --- elementary samplers -------------------------------------------------

namespace detail {

// One N(0, h Id_dim) vector for a given cell.
inline void fill_brownian_row(CellRng& rng, int dim, double sqrt_h, double* out) {
    for (int d = 0; d < dim; ++d) out[d] = sqrt_h * rng.next_normal();
}

// Increment of a standard Cauchy process over time h: scale-h Cauchy per
// component, via the inverse CDF.  Open-interval uniforms keep tan finite.
inline void fill_cauchy_row(CellRng& rng, int dim, double h, double* out) {
    for (int d = 0; d < dim; ++d) {
        const double u = rng.next_uniform();
        out[d] = h * std::tan(std::numbers::pi * (u - 0.5));
    }
}

// Chambers-Mallows-Stuck, symmetric case.  At alpha=1 the second factor is
// (.)^0 = 1 exactly and the formula degenerates to tan(V), the Cauchy law.
inline void fill_stable_row(CellRng& rng, double alpha, int dim, double scale, double* out) {
    for (int d = 0; d < dim; ++d) {
        const double v = std::numbers::pi * (rng.next_uniform() - 0.5);
        const double w = rng.next_exponential();
        const double s = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha);
        const double t = std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
        out[d] = scale * s * t;
    }
}

// Jump-size samplers for the compound-Poisson kind.  Each draws one
// dim-dimensional jump from the cell stream.
struct JumpSampler {
    enum class Family { Pareto, Gauss, Unit } family = Family::Pareto;
    double pareto_index = 2.5;

    void draw(CellRng& rng, int dim, double* out) const {
        switch (family) {
        case Family::Gauss:
            for (int d = 0; d < dim; ++d) out[d] = rng.next_normal();
            return;
        case Family::Unit:
        case Family::Pareto: {
            // radius 1 (Unit) or Pareto(index) on [1,inf); isotropic direction
            double radius = 1.0;
            if (family == Family::Pareto)
                radius = std::pow(rng.next_uniform(), -1.0 / pareto_index);
            if (dim == 1) {
                out[0] = (rng.next_u64() & 1u) ? radius : -radius;
                return;
            }
            double norm2 = 0.0;
            for (int d = 0; d < dim; ++d) {
                out[d] = rng.next_normal();
                norm2 += out[d] * out[d];
            }
            const double inv = radius / std::sqrt(norm2);
            for (int d = 0; d < dim; ++d) out[d] *= inv;
            return;
        }
        }
    }
};

inline JumpSampler parse_jump_sampler(const std::string& id) {
    JumpSampler s;
    if (id == "gauss") {
        s.family = JumpSampler::Family::Gauss;
    } else if (id == "unit") {
        s.family = JumpSampler::Family::Unit;
    } else if (id.rfind("pareto:", 0) == 0) {
        s.family = JumpSampler::Family::Pareto;
        try {
            s.pareto_index = std::stod(id.substr(7));
        } catch (const std::exception&) {
            throw std::invalid_argument("jump sampler '" + id + "': bad index");
        }
        if (!(s.pareto_index > 0))
            throw std::invalid_argument("jump sampler '" + id + "': index must be > 0");
    } else {
        throw std::invalid_argument(
            "unknown jump sampler '" + id + "' (registry: pareto:<index>, gauss, unit)");
    }
    return s;
}

// Compound Poisson increment over time h: Poisson(rate*h) many i.i.d. jumps.
// The count is realized by multiplying uniforms (product method), which is
// exact and consumes a deterministic-per-outcome number of words.
inline void fill_compound_poisson_row(CellRng& rng, double rate, const JumpSampler& sampler,
                                      int dim, double h, double* out) {
    for (int d = 0; d < dim; ++d) out[d] = 0.0;
    const double threshold = std::exp(-rate * h);
    double prod = rng.next_uniform();
    double jump[16];
    std::vector<double> jump_dyn;
    double* jbuf = jump;
    if (dim > 16) {
        jump_dyn.resize(dim);
        jbuf = jump_dyn.data();
    }
    while (prod > threshold) {
        sampler.draw(rng, dim, jbuf);
        for (int d = 0; d < dim; ++d) out[d] += jbuf[d];
        prod *= rng.next_uniform();
    }
}

} // namespace detail

// --- public generation ops ------------------------------------------------
// Draw k (k = 0..count-1) lives in the cell (key.path_index,
// key.step_index + k, key.channel); output is row-major count x dim.

inline std::vector<double> brownian_increments(const StreamKey& key, int dim, double h,
                                               long count) {
    if (!(h > 0)) throw std::invalid_argument("brownian_increments: h must be > 0");
    if (count < 1) throw std::invalid_argument("brownian_increments: count must be >= 1");
    if (dim < 1) throw std::invalid_argument("brownian_increments: dim must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(count) * dim);
    const double sqrt_h = std::sqrt(h);
    StreamKey k = key;
    for (long i = 0; i < count; ++i, ++k.step_index) {
        CellRng rng(k);
        detail::fill_brownian_row(rng, dim, sqrt_h, out.data() + i * dim);
    }
    return out;
}

inline std::vector<double> cauchy_increments(const StreamKey& key, int dim, double h,
                                             long count) {
    if (!(h > 0)) throw std::invalid_argument("cauchy_increments: h must be > 0");
    if (count < 1) throw std::invalid_argument("cauchy_increments: count must be >= 1");
    if (dim < 1) throw std::invalid_argument("cauchy_increments: dim must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(count) * dim);
    StreamKey k = key;
    for (long i = 0; i < count; ++i, ++k.step_index) {
        CellRng rng(k);
        detail::fill_cauchy_row(rng, dim, h, out.data() + i * dim);
    }
    return out;
}

inline std::vector<double> stable_increments(const StreamKey& key, double alpha, int dim,
                                             double h, long count) {
    if (!(alpha > 0.0 && alpha < 2.0))
        throw std::invalid_argument("stable_increments: alpha must lie in (0,2); "
                                    "use brownian_increments for the Gaussian case");
    if (!(h > 0)) throw std::invalid_argument("stable_increments: h must be > 0");
    if (count < 1) throw std::invalid_argument("stable_increments: count must be >= 1");
    if (dim < 1) throw std::invalid_argument("stable_increments: dim must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(count) * dim);
    const double scale = std::pow(h, 1.0 / alpha);
    StreamKey k = key;
    for (long i = 0; i < count; ++i, ++k.step_index) {
        CellRng rng(k);
        detail::fill_stable_row(rng, alpha, dim, scale, out.data() + i * dim);
    }
    return out;
}

inline std::vector<double> compound_poisson_increments(const StreamKey& key, double rate,
                                                       const std::string& jump_sampler_id,
                                                       int dim, double h, long count) {
    if (!(rate > 0)) throw std::invalid_argument("compound_poisson_increments: rate must be > 0");
    if (!(h > 0)) throw std::invalid_argument("compound_poisson_increments: h must be > 0");
    if (count < 1) throw std::invalid_argument("compound_poisson_increments: count must be >= 1");
    if (dim < 1) throw std::invalid_argument("compound_poisson_increments: dim must be >= 1");
    const detail::JumpSampler sampler = detail::parse_jump_sampler(jump_sampler_id);
    std::vector<double> out(static_cast<std::size_t>(count) * dim);
    StreamKey k = key;
    for (long i = 0; i < count; ++i, ++k.step_index) {
        CellRng rng(k);
        detail::fill_compound_poisson_row(rng, rate, sampler, dim, h, out.data() + i * dim);
    }
    return out;
}

// Full per-path grid: step k draws its Brownian row from channel Brownian and
// its Levy row from channel Levy of cell (path_index, k).
// Fills (and reuses the capacity of) an existing grid; the ensemble driver
// calls this once per path without reallocating.
inline void fill_noise_grid(const NoiseSpec& spec, std::uint64_t master_seed,
                            std::uint64_t path_index, long n_steps, double h, NoiseGrid& grid) {
    spec.validate();
    if (n_steps < 1) throw std::invalid_argument("make_noise_grid: n_steps must be >= 1");
    if (!(h > 0)) throw std::invalid_argument("make_noise_grid: h must be > 0");

    grid.base.reset();
    grid.ratio_from_base = 1;
    grid.n_steps = n_steps;
    grid.h = h;
    grid.brownian_dim = spec.brownian_dim;
    grid.levy_dim = spec.levy_kind == LevyKind::None ? 0 : spec.levy_dim;
    grid.dB.resize(static_cast<std::size_t>(n_steps) * grid.brownian_dim);
    grid.dZ.resize(static_cast<std::size_t>(n_steps) * grid.levy_dim);

    const double sqrt_h = std::sqrt(h);
    const double stable_scale =
        spec.levy_kind == LevyKind::SymmetricAlphaStable ? std::pow(h, 1.0 / spec.alpha) : 0.0;
    detail::JumpSampler sampler;
    if (spec.levy_kind == LevyKind::CompoundPoisson)
        sampler = detail::parse_jump_sampler(spec.jump_sampler_id);

    for (long k = 0; k < n_steps; ++k) {
        if (grid.brownian_dim > 0) {
            CellRng rng(StreamKey{master_seed, path_index, static_cast<std::uint64_t>(k),
                                  Channel::Brownian});
            detail::fill_brownian_row(rng, grid.brownian_dim, sqrt_h,
                                      grid.dB.data() + k * grid.brownian_dim);
        }
        if (grid.levy_dim > 0) {
            CellRng rng(StreamKey{master_seed, path_index, static_cast<std::uint64_t>(k),
                                  Channel::Levy});
            double* row = grid.dZ.data() + k * grid.levy_dim;
            switch (spec.levy_kind) {
            case LevyKind::Cauchy:
                detail::fill_cauchy_row(rng, grid.levy_dim, h, row);
                break;
            case LevyKind::SymmetricAlphaStable:
                detail::fill_stable_row(rng, spec.alpha, grid.levy_dim, stable_scale, row);
                break;
            case LevyKind::CompoundPoisson:
                detail::fill_compound_poisson_row(rng, spec.cp_rate, sampler, grid.levy_dim, h,
                                                  row);
                break;
            case LevyKind::None:
                break;
            }
        }
    }
}

inline NoiseGrid make_noise_grid(const NoiseSpec& spec, std::uint64_t master_seed,
                                 std::uint64_t path_index, long n_steps, double h) {
    NoiseGrid grid;
    fill_noise_grid(spec, master_seed, path_index, n_steps, h, grid);
    return grid;
}

// --- nested-grid aggregation -----------------------------------------------

namespace detail {

inline NoiseGrid aggregate_from_base(std::shared_ptr<const NoiseGrid> base, long total_ratio) {
    const NoiseGrid& src = *base;
    if (src.n_steps % total_ratio != 0)
        throw std::invalid_argument("aggregate_to_coarse: n_steps not divisible by ratio");

    NoiseGrid coarse;
    coarse.n_steps = src.n_steps / total_ratio;
    coarse.h = src.h * static_cast<double>(total_ratio);
    coarse.brownian_dim = src.brownian_dim;
    coarse.levy_dim = src.levy_dim;
    coarse.dB.resize(static_cast<std::size_t>(coarse.n_steps) * coarse.brownian_dim);
    coarse.dZ.resize(static_cast<std::size_t>(coarse.n_steps) * coarse.levy_dim);

    // Plain left-to-right sums over the base increments: the summation order
    // depends only on (base, total_ratio), which makes nested aggregation
    // compose bitwise.
    const auto sum_rows = [total_ratio](const std::vector<double>& fine, int dim, long k,
                                        double* out) {
        for (int d = 0; d < dim; ++d) out[d] = 0.0;
        const double* row = fine.data() + static_cast<std::size_t>(k) * total_ratio * dim;
        for (long j = 0; j < total_ratio; ++j, row += dim)
            for (int d = 0; d < dim; ++d) out[d] += row[d];
    };
    for (long k = 0; k < coarse.n_steps; ++k) {
        if (coarse.brownian_dim > 0)
            sum_rows(src.dB, coarse.brownian_dim, k, coarse.dB.data() + k * coarse.brownian_dim);
        if (coarse.levy_dim > 0)
            sum_rows(src.dZ, coarse.levy_dim, k, coarse.dZ.data() + k * coarse.levy_dim);
    }
    coarse.base = std::move(base);
    coarse.ratio_from_base = total_ratio;
    return coarse;
}

} // namespace detail

// Aggregate onto a grid ratio times coarser.  Accepts a shared grid to avoid
// copying when the caller already owns one.
inline NoiseGrid aggregate_to_coarse(std::shared_ptr<const NoiseGrid> fine, long ratio) {
    if (ratio < 1) throw std::invalid_argument("aggregate_to_coarse: ratio must be >= 1");
    if (ratio == 1) return *fine; // identity copy (provenance preserved)
    if (fine->base)
        return detail::aggregate_from_base(fine->base, fine->ratio_from_base * ratio);
    return detail::aggregate_from_base(std::move(fine), ratio);
}

inline NoiseGrid aggregate_to_coarse(const NoiseGrid& fine, long ratio) {
    if (ratio < 1) throw std::invalid_argument("aggregate_to_coarse: ratio must be >= 1");
    if (ratio == 1) return fine;
    if (fine.base) return detail::aggregate_from_base(fine.base, fine.ratio_from_base * ratio);
    return detail::aggregate_from_base(std::make_shared<const NoiseGrid>(fine), ratio);
}

} // namespace levysim
