#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "diffmart/boundary.hpp"
#include "diffmart/classifier.hpp"
#include "diffmart/diffusion.hpp"
#include "diffmart/errors.hpp"
#include "diffmart/excessive.hpp"
#include "diffmart/numerics.hpp"

namespace diffmart {

// Counter-based per-path random stream: the state is derived from (seed, path
// index) alone, so any path can be generated in isolation and in any order.
// splitmix64 increments with a Stafford mix13 finalizer.
struct PathStream {
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    PathStream(std::uint64_t seed, std::uint64_t path_index)
        : state(mix(seed + kGolden * (path_index + 1))), stream_id(state) {}

    std::uint64_t next() {
        state += kGolden;
        return mix(state);
    }

    // uniform on (0, 1]: zero is excluded so log() below stays finite
    double uniform() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

    std::uint64_t state;
    std::uint64_t stream_id;
};

inline double z_for_confidence(double c) {
    if (c == 0.90) return 1.6448536269514722;
    if (c == 0.95) return 1.959963984540054;
    if (c == 0.99) return 2.5758293035489004;
    if (c == 0.995) return 2.807033768343811;
    throw ConfigError("unsupported confidence level " + format_double(c) +
                      "; supported: 0.90, 0.95, 0.99, 0.995");
}

enum class BoundaryPolicy { absorb_at_accessible };

struct SimulationConfig {
    double initial_state = kNaN;
    double horizon = kNaN;
    double step = kNaN;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    BoundaryPolicy boundary_policy = BoundaryPolicy::absorb_at_accessible;
    double confidence = 0.99;
};

struct PathEnsemble {
    std::vector<double> snapshot_times;
    std::vector<std::vector<double>> states; // [snapshot][path]
    std::vector<unsigned char> absorbed;
    std::vector<double> absorption_time;  // +inf when never absorbed
    std::vector<double> absorption_state; // NaN when never absorbed
    std::vector<std::uint64_t> rng_stream_ids;
};

struct EstimateWithCI {
    double mean = kNaN;
    double half_width = kNaN;
    std::size_t n_effective = 0;
    std::string warning; // empty when clean
};

inline void validate_simulation(const ScaleSpeed& ss, const SimulationConfig& cfg) {
    if (!std::isfinite(cfg.initial_state) ||
        !ss.interval().contains_interior(cfg.initial_state))
        throw ConfigError("simulation initial state " + format_double(cfg.initial_state) +
                          " must be interior to (" + format_double(ss.interval().alpha) +
                          ", " + format_double(ss.interval().beta) + ")");
    if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon))
        throw ConfigError("simulation horizon must be positive and finite");
    if (!(cfg.step > 0.0) || !std::isfinite(cfg.step))
        throw ConfigError("simulation step must be positive and finite");
    if (!(cfg.step < cfg.horizon))
        throw ConfigError("simulation step must be smaller than the horizon");
    if (cfg.paths < 100) throw ConfigError("simulation needs at least 100 paths");
    (void)z_for_confidence(cfg.confidence);
}

namespace detail {

constexpr double kTwoPi = 6.283185307179586476925286766559;

inline std::size_t step_count(const SimulationConfig& cfg) {
    const double raw = cfg.horizon / cfg.step;
    const double k = std::ceil(raw - 1e-9);
    return std::max<std::size_t>(static_cast<std::size_t>(k), 1);
}

struct EndpointGuard {
    bool finite = false;
    bool absorbing = false;
    double x = kNaN;
};

inline EndpointGuard endpoint_guard(const ScaleSpeed& ss, Side side) {
    EndpointGuard g;
    const double e = side == Side::alpha ? ss.interval().alpha : ss.interval().beta;
    if (!std::isfinite(e)) return g;
    g.finite = true;
    g.x = e;
    g.absorbing = classify_boundary(ss, side).kind == BoundaryKind::Accessible;
    return g;
}

struct Barrier {
    double y = kNaN;
    bool above = true; // barrier lies above the start point
};

struct PathRun {
    bool absorbed = false;
    bool at_barrier = false;
    double time = kInf;
    double state = kNaN;
};

// One Euler path. Every step consumes exactly three uniforms (two for the
// Box-Muller draw, one reserved for the barrier bridge), so the stream layout
// is identical whether or not a barrier is present. `visit(k, t, x)` runs
// after each completed step with 1-based step index; it stops on absorption.
template <class Visit>
inline void walk_path(const ScaleSpeed& ss, const SimulationConfig& cfg,
                      const EndpointGuard& ga, const EndpointGuard& gb,
                      const Barrier* bar, std::uint64_t path_index, Visit&& visit,
                      PathRun& run) {
    PathStream gen(cfg.seed, path_index);
    const std::size_t steps = step_count(cfg);
    double x = cfg.initial_state;
    double t = 0.0;
    run = PathRun{};
    for (std::size_t k = 0; k < steps; ++k) {
        const double t_next = (k + 1 == steps) ? cfg.horizon : (k + 1) * cfg.step;
        const double dt = t_next - t;
        const double u1 = gen.uniform();
        const double u2 = gen.uniform();
        const double u3 = gen.uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
        const double s = ss.volatility(x);
        double x_next = x + ss.drift(x) * dt + s * std::sqrt(dt) * z;
        if (!std::isfinite(x_next))
            throw SimulationError(
                "path " + std::to_string(path_index) + " overflowed at t = " +
                format_double(t) + " from x = " + format_double(x) +
                "; the explicit scheme is unstable for coefficients growing this fast, "
                "reduce the step size");

        if (ga.finite && x_next <= ga.x) {
            if (ga.absorbing) {
                const double theta = (ga.x - x) / (x_next - x);
                run = {true, false, t + theta * dt, ga.x};
                return;
            }
            // inaccessible: the exact diffusion never crosses; fold the
            // discretization overshoot back inside
            x_next = 2.0 * ga.x - x_next;
            if (x_next <= ga.x) x_next = std::nextafter(ga.x, kInf);
        }
        if (gb.finite && x_next >= gb.x) {
            if (gb.absorbing) {
                const double theta = (gb.x - x) / (x_next - x);
                run = {true, false, t + theta * dt, gb.x};
                return;
            }
            x_next = 2.0 * gb.x - x_next;
            if (x_next >= gb.x) x_next = std::nextafter(gb.x, -kInf);
        }
        if ((ga.finite && x_next <= ga.x) || (gb.finite && x_next >= gb.x))
            throw SolverError("reflection guard failed to keep the state interior near x = " +
                              format_double(x));

        if (bar) {
            const bool crossed = bar->above ? x_next >= bar->y : x_next <= bar->y;
            if (crossed) {
                const double theta = (bar->y - x) / (x_next - x);
                run = {true, true, t + theta * dt, bar->y};
                return;
            }
            // both ends on the same side: Brownian-bridge crossing
            // probability over the step, decided by the reserved uniform
            const double pc =
                std::exp(-2.0 * (bar->y - x) * (bar->y - x_next) / (s * s * dt));
            if (u3 <= pc) {
                run = {true, true, t + 0.5 * dt, bar->y};
                return;
            }
        }

        x = x_next;
        t = t_next;
        visit(k + 1, t, x);
    }
}

inline EstimateWithCI reduce_mean_ci(const std::vector<double>& vals, double confidence) {
    const std::size_t n = vals.size();
    if (n == 0) throw SolverError("estimate reduction received no samples");
    EstimateWithCI e;
    e.mean = pairwise_sum(vals.data(), n) / static_cast<double>(n);
    double var = 0.0;
    if (n > 1) {
        std::vector<double> sq(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = vals[i] - e.mean;
            sq[i] = d * d;
        }
        var = pairwise_sum(sq.data(), n) / static_cast<double>(n - 1);
    }
    e.half_width = std::max(z_for_confidence(confidence) * std::sqrt(var / static_cast<double>(n)),
                            std::numeric_limits<double>::min());
    e.n_effective = n;
    return e;
}

// Evaluation clamped to the solved hull; exits are counted so callers can
// enforce the rejection threshold.
struct HullClampCount {
    double lo = kNaN;
    double hi = kNaN;
    std::size_t exits = 0;

    explicit HullClampCount(const ExcessiveFunction& f)
        : lo(f.grid.front()), hi(f.grid.back()) {}

    double clamp(double x) {
        if (x < lo) {
            ++exits;
            return lo;
        }
        if (x > hi) {
            ++exits;
            return hi;
        }
        return x;
    }

    // absorption states sit exactly on an endpoint outside the open hull by
    // construction; folding them in is not a hull exit
    double clamp_silent(double x) const { return std::min(std::max(x, lo), hi); }
};

inline void require_exit_fraction(std::size_t exits, std::size_t n, const std::string& what) {
    if (static_cast<double>(exits) > 1e-3 * static_cast<double>(n))
        throw SolverError(what + ": " + std::to_string(exits) + " of " + std::to_string(n) +
                          " paths left the solved hull (above the 0.1% rejection threshold); "
                          "widen the hull or shorten the horizon");
}

} // namespace detail

// Euler-Maruyama ensemble with states recorded at the requested snapshot
// times (each must sit on the step grid). Accessible endpoints absorb with a
// linearly interpolated crossing time; inaccessible finite endpoints reflect
// the discretization overshoot. Paths are constant after absorption.
inline PathEnsemble simulate(const ScaleSpeed& ss, const SimulationConfig& cfg,
                             const std::vector<double>& snapshot_times) {
    validate_simulation(ss, cfg);
    const std::size_t steps = detail::step_count(cfg);
    std::vector<std::size_t> snap_idx(snapshot_times.size());
    for (std::size_t j = 0; j < snapshot_times.size(); ++j) {
        const double t = snapshot_times[j];
        if (j > 0 && !(t > snapshot_times[j - 1]))
            throw ConfigError("snapshot times must be strictly increasing");
        if (!(t >= 0.0) || t > cfg.horizon * (1.0 + 1e-12))
            throw ConfigError("snapshot time " + format_double(t) +
                              " outside [0, horizon]");
        if (std::abs(t - cfg.horizon) <= 1e-9 * std::max(1.0, cfg.horizon)) {
            snap_idx[j] = steps; // the final partial step ends exactly at the horizon
            continue;
        }
        const auto k = static_cast<std::size_t>(std::llround(t / cfg.step));
        const double grid_t = (k >= steps) ? cfg.horizon : k * cfg.step;
        if (std::abs(grid_t - t) > 1e-9 * std::max(1.0, std::abs(t)))
            throw ConfigError("snapshot time " + format_double(t) +
                              " does not sit on the step grid");
        snap_idx[j] = std::min(k, steps);
    }

    const detail::EndpointGuard ga = detail::endpoint_guard(ss, Side::alpha);
    const detail::EndpointGuard gb = detail::endpoint_guard(ss, Side::beta);

    PathEnsemble out;
    out.snapshot_times = snapshot_times;
    out.states.assign(snapshot_times.size(), std::vector<double>(cfg.paths, kNaN));
    out.absorbed.assign(cfg.paths, 0);
    out.absorption_time.assign(cfg.paths, kInf);
    out.absorption_state.assign(cfg.paths, kNaN);
    out.rng_stream_ids.resize(cfg.paths);

    for (std::size_t i = 0; i < cfg.paths; ++i) {
        out.rng_stream_ids[i] = PathStream(cfg.seed, i).stream_id;
        std::size_t cursor = 0;
        while (cursor < snap_idx.size() && snap_idx[cursor] == 0) {
            out.states[cursor][i] = cfg.initial_state;
            ++cursor;
        }
        detail::PathRun run;
        detail::walk_path(
            ss, cfg, ga, gb, nullptr, i,
            [&](std::size_t k, double, double x) {
                while (cursor < snap_idx.size() && snap_idx[cursor] == k) {
                    out.states[cursor][i] = x;
                    ++cursor;
                }
            },
            run);
        if (run.absorbed) {
            out.absorbed[i] = 1;
            out.absorption_time[i] = run.time;
            out.absorption_state[i] = run.state;
            for (; cursor < snap_idx.size(); ++cursor) out.states[cursor][i] = run.state;
        }
    }
    return out;
}

inline PathEnsemble simulate(const ScaleSpeed& ss, const SimulationConfig& cfg) {
    return simulate(ss, cfg, {0.0, cfg.horizon});
}

// f(x0) minus the Monte Carlo estimate of E[e^{-r (t ^ T)} f(X_{t ^ T})],
// T the accessible-endpoint absorption time. Positive deficit beyond noise
// is the strict local martingale signature; a martingale sits at zero.
inline EstimateWithCI martingale_deficit(const ExcessiveFunction& f,
                                         const SimulationConfig& cfg) {
    const ScaleSpeed& ss = f.source();
    if (cfg.horizon == 0.0) {
        // no evolution: the estimator is exact and the CI is degenerate
        EstimateWithCI e;
        e.mean = 0.0;
        e.half_width = std::numeric_limits<double>::min();
        e.n_effective = cfg.paths;
        return e;
    }
    validate_simulation(ss, cfg);
    const detail::EndpointGuard ga = detail::endpoint_guard(ss, Side::alpha);
    const detail::EndpointGuard gb = detail::endpoint_guard(ss, Side::beta);
    const double r = f.rate.r;
    detail::HullClampCount hull(f);

    std::vector<double> vals(cfg.paths);
    for (std::size_t i = 0; i < cfg.paths; ++i) {
        double x_end = kNaN;
        detail::PathRun run;
        detail::walk_path(
            ss, cfg, ga, gb, nullptr, i, [&](std::size_t, double, double x) { x_end = x; },
            run);
        if (run.absorbed)
            vals[i] = std::exp(-r * run.time) * f.evaluate(hull.clamp_silent(run.state));
        else
            vals[i] = std::exp(-r * cfg.horizon) * f.evaluate(hull.clamp(x_end));
    }
    detail::require_exit_fraction(hull.exits, cfg.paths, "martingale deficit");

    EstimateWithCI est = detail::reduce_mean_ci(vals, cfg.confidence);
    est.mean = f.evaluate(cfg.initial_state) - est.mean;
    return est;
}

// Same check for the scale process p(X): E[p(X_{t ^ T})] - p(x0). The sign
// convention follows the sub/supermartingale verdicts: positive when scale
// mass leaks toward an entrance-type lower endpoint.
inline EstimateWithCI scale_deficit(const ScaleSpeed& ss, const SimulationConfig& cfg) {
    validate_simulation(ss, cfg);
    const detail::EndpointGuard ga = detail::endpoint_guard(ss, Side::alpha);
    const detail::EndpointGuard gb = detail::endpoint_guard(ss, Side::beta);
    // scale evaluation is only defined on the open interval; an accessible
    // endpoint has a finite scale limit, approximated by hugging the endpoint
    // (the skipped sliver's scale mass is negligible against MC noise)
    const double x0 = cfg.initial_state;
    const double pa = ga.absorbing ? ss.scale(ga.x + 1e-12 * (x0 - ga.x)) : kNaN;
    const double pb = gb.absorbing ? ss.scale(gb.x - 1e-12 * (gb.x - x0)) : kNaN;

    std::vector<double> vals(cfg.paths);
    for (std::size_t i = 0; i < cfg.paths; ++i) {
        double x_end = kNaN;
        detail::PathRun run;
        detail::walk_path(
            ss, cfg, ga, gb, nullptr, i, [&](std::size_t, double, double x) { x_end = x; },
            run);
        if (run.absorbed)
            vals[i] = run.state == ga.x ? pa : pb;
        else
            vals[i] = ss.scale(x_end);
    }
    EstimateWithCI est = detail::reduce_mean_ci(vals, cfg.confidence);
    est.mean = est.mean - ss.scale(cfg.initial_state);
    return est;
}

// E_x[e^{-r T_y}] by simulation absorbed at the interior level y, with a
// per-step Brownian-bridge crossing correction. Censored paths (horizon
// reached, or absorbed at an accessible endpoint on the far side) count as
// zero, biasing downward by at most e^{-r horizon} per censored path.
inline EstimateWithCI hitting_laplace(const ScaleSpeed& ss, double x, double y,
                                      DiscountRate r, SimulationConfig cfg) {
    if (!ss.interval().contains_interior(y))
        throw ConfigError("hitting level " + format_double(y) +
                          " must be interior to the state interval");
    cfg.initial_state = x;
    if (x == y) {
        EstimateWithCI e;
        e.mean = 1.0;
        e.half_width = std::numeric_limits<double>::min();
        e.n_effective = cfg.paths;
        return e;
    }
    validate_simulation(ss, cfg);
    const detail::EndpointGuard ga = detail::endpoint_guard(ss, Side::alpha);
    const detail::EndpointGuard gb = detail::endpoint_guard(ss, Side::beta);
    detail::Barrier bar;
    bar.y = y;
    bar.above = y > x;

    std::vector<double> vals(cfg.paths);
    std::size_t censored = 0;
    for (std::size_t i = 0; i < cfg.paths; ++i) {
        detail::PathRun run;
        detail::walk_path(ss, cfg, ga, gb, &bar, i, [](std::size_t, double, double) {}, run);
        if (run.absorbed && run.at_barrier) {
            vals[i] = std::exp(-r.r * run.time);
        } else {
            vals[i] = 0.0;
            ++censored;
        }
    }
    EstimateWithCI est = detail::reduce_mean_ci(vals, cfg.confidence);
    const double frac = static_cast<double>(censored) / static_cast<double>(cfg.paths);
    if (frac * std::exp(-r.r * cfg.horizon) > est.half_width)
        est.warning = "censoring bias bound " + format_double(frac * std::exp(-r.r * cfg.horizon)) +
                      " exceeds the CI half-width; extend the horizon";
    return est;
}

struct RatioIdentity {
    double lhs = kNaN;          // extrapolated limit of f_r / f_s at the growth side
    EstimateWithCI rhs;         // identity right-hand side with propagated CI
    double truncation_bound = kNaN; // remainder bound on the rhs scale
    std::vector<double> times;       // time grid of the inner expectations
    std::vector<double> time_means;  // estimated E[e^{-ru} f_r(X_u)] per time
};

// Cross-checks the limit extrapolation against the resolvent identity
//   lim f_r/f_s = f_r(x)/f_s(x)
//     - ((s-r)/f_s(x)) * Int_0^inf e^{-(s-r)u} E_x[e^{-ru} f_r(X_u)] du,
// the integral truncated at the horizon and evaluated by trapezoid over a
// geometric time grid snapped to simulation steps.
inline RatioIdentity ratio_identity_check(const ScaleSpeed& ss, DiscountRate r,
                                          DiscountRate s, double x, SimulationConfig cfg,
                                          Side side = Side::beta) {
    if (!(s.r > r.r))
        throw ConfigError("ratio identity needs the companion rate above the base rate");
    cfg.initial_state = x;
    validate_simulation(ss, cfg);

    const Direction dir =
        side == Side::beta ? Direction::increasing : Direction::decreasing;
    const ExcessiveFunction f_r = solve_excessive(ss, r, dir, {});
    const ExcessiveFunction f_s = solve_excessive(ss, s, dir, {});

    RatioIdentity out;
    const LimitEstimate lim = rate_ratio_limit(f_r, f_s); // limit of f_s / f_r
    if (lim.regime == LimitRegime::DivergesToInfinity)
        out.lhs = 0.0;
    else if (lim.regime == LimitRegime::FinitePositive)
        out.lhs = 1.0 / lim.value;
    else
        throw InconclusiveError(std::string("ratio identity: the ") +
                                limit_regime_name(lim.regime) +
                                " rate-ratio extrapolation has no usable limit");

    // geometric time grid on [step, horizon] snapped onto step indices
    const std::size_t steps = detail::step_count(cfg);
    std::vector<std::size_t> ks;
    for (int j = 0; j < 64; ++j) {
        const double u = cfg.step * std::pow(cfg.horizon / cfg.step,
                                             static_cast<double>(j) / 63.0);
        auto k = static_cast<std::size_t>(std::llround(u / cfg.step));
        k = std::min(std::max<std::size_t>(k, 1), steps);
        if (ks.empty() || k > ks.back()) ks.push_back(k);
    }
    const std::size_t m = ks.size();
    std::vector<double> times(m + 1, 0.0);
    for (std::size_t j = 0; j < m; ++j)
        times[j + 1] = (ks[j] >= steps) ? cfg.horizon : ks[j] * cfg.step;

    const detail::EndpointGuard ga = detail::endpoint_guard(ss, Side::alpha);
    const detail::EndpointGuard gb = detail::endpoint_guard(ss, Side::beta);
    detail::HullClampCount hull(f_r);
    const double fr_x = f_r.evaluate(x);
    const double fs_x = f_s.evaluate(x);
    const double gap = s.r - r.r;

    std::vector<double> rhs_vals(cfg.paths);
    std::vector<std::vector<double>> w_cols(m, std::vector<double>(cfg.paths, kNaN));
    std::vector<double> w(m + 1, kNaN);
    for (std::size_t i = 0; i < cfg.paths; ++i) {
        w[0] = fr_x;
        std::size_t cursor = 0;
        detail::PathRun run;
        detail::walk_path(
            ss, cfg, ga, gb, nullptr, i,
            [&](std::size_t k, double t, double xk) {
                while (cursor < m && ks[cursor] == k) {
                    w[cursor + 1] = std::exp(-r.r * t) * f_r.evaluate(hull.clamp(xk));
                    ++cursor;
                }
            },
            run);
        if (run.absorbed) {
            // stopped form: constant state, discount frozen at the hit time
            const double v =
                std::exp(-r.r * run.time) * f_r.evaluate(hull.clamp_silent(run.state));
            for (; cursor < m; ++cursor) w[cursor + 1] = v;
        }
        double integral = 0.0;
        for (std::size_t j = 0; j + 1 < times.size(); ++j) {
            const double g0 = std::exp(-gap * times[j]) * w[j];
            const double g1 = std::exp(-gap * times[j + 1]) * w[j + 1];
            integral += 0.5 * (g0 + g1) * (times[j + 1] - times[j]);
        }
        rhs_vals[i] = fr_x / fs_x - gap / fs_x * integral;
        for (std::size_t j = 0; j < m; ++j) w_cols[j][i] = w[j + 1];
    }
    detail::require_exit_fraction(hull.exits, cfg.paths, "ratio identity");

    out.rhs = detail::reduce_mean_ci(rhs_vals, cfg.confidence);
    out.times = times;
    out.time_means.assign(m + 1, fr_x);
    for (std::size_t j = 0; j < m; ++j)
        out.time_means[j + 1] =
            pairwise_sum(w_cols[j].data(), cfg.paths) / static_cast<double>(cfg.paths);
    out.truncation_bound = fr_x * std::exp(-gap * cfg.horizon) / fs_x;
    if (out.truncation_bound > out.rhs.half_width)
        throw InconclusiveError(
            "ratio identity: truncation remainder bound " +
            format_double(out.truncation_bound) + " exceeds the CI half-width " +
            format_double(out.rhs.half_width) + "; extend the horizon");
    return out;
}

} // namespace diffmart
