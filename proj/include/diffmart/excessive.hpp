#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "diffmart/diffusion.hpp"
#include "diffmart/errors.hpp"
#include "diffmart/interpolation.hpp"
#include "diffmart/interval.hpp"
#include "diffmart/numerics.hpp"
#include "diffmart/quadrature.hpp"

namespace diffmart {

enum class Direction { increasing, decreasing };

inline const char* direction_name(Direction d) {
    return d == Direction::increasing ? "increasing" : "decreasing";
}

struct DiscountRate {
    double r;
    DiscountRate(double v) : r(v) {
        if (!std::isfinite(v) || v <= 0.0)
            throw ConfigError("discount rate must be positive and finite, got " +
                              format_double(v));
    }
};

// Node layout for solve_excessive. The hull is where values are reported;
// the solver itself starts further out (see extension_nodes below). Hull
// endpoints left as NaN pick a default margin near each boundary, sized for
// diagnostic use (limit regimes, not point accuracy). max_log_value bounds
// log(f(x)/f(x0)); past it the solve aborts with the offending location, for
// callers that need plain doubles.
struct GridSpec {
    int node_count = 2000;
    double hull_alpha = kNaN;
    double hull_beta = kNaN;
    double max_log_value = kInf;
};

class ExcessiveFunction;
inline ExcessiveFunction solve_excessive(const ScaleSpeed& ss, DiscountRate rate,
                                         Direction dir, GridSpec gs);

// Minimal r-excessive solution on a grid: increasing (psi) or decreasing
// (phi), normalized to 1 at the reference point of the underlying diffusion.
// values/scale_derivative are plain doubles and may saturate to +-inf far
// out; log_values and log_abs_scale_derivative stay finite everywhere.
class ExcessiveFunction {
  public:
    Direction direction;
    DiscountRate rate;
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<double> log_values;
    std::vector<double> scale_derivative;         // d+f/dp, sign carried
    std::vector<double> log_abs_scale_derivative;
    std::vector<double> scale_at_nodes;           // p(x), p(x0) = 0, may saturate
    double normalization_point;
    std::size_t norm_index;

    double evaluate(double x) const {
        const std::size_t j = locate(x);
        if (grid[j] == x) return values[j];
        if (p_interp_ && x > grid[p_lo_] && x < grid[p_hi_]) {
            double px = source_.scale(x);
            // the query scale comes from a different integration path than the
            // node scales; clamp so rounding cannot push it past the window
            px = std::min(std::max(px, scale_at_nodes[p_lo_]), scale_at_nodes[p_hi_]);
            return (*p_interp_)(px);
        }
        return std::exp((*x_log_interp_)(x));
    }

    double evaluate_log(double x) const {
        const std::size_t j = locate(x);
        if (grid[j] == x) return log_values[j];
        return (*x_log_interp_)(x);
    }

    double scale_derivative_at(double x) const {
        const std::size_t j = locate(x);
        if (grid[j] == x) return scale_derivative[j];
        if (p_deriv_interp_ && x > grid[p_lo_] && x < grid[p_hi_]) {
            double px = source_.scale(x);
            px = std::min(std::max(px, scale_at_nodes[p_lo_]), scale_at_nodes[p_hi_]);
            return (*p_deriv_interp_)(px);
        }
        const double mag = std::exp((*x_log_deriv_interp_)(x));
        return direction == Direction::increasing ? mag : -mag;
    }

    // Same solution under a different multiplicative normalization; ratios
    // and scale_derivative/value quotients are unchanged.
    ExcessiveFunction rescaled(double c) const {
        if (!std::isfinite(c) || c <= 0.0)
            throw ConfigError("rescale factor must be positive and finite");
        ExcessiveFunction out(*this);
        const double lc = std::log(c);
        for (auto& v : out.values) v *= c;
        for (auto& v : out.log_values) v += lc;
        for (auto& v : out.scale_derivative) v *= c;
        for (auto& v : out.log_abs_scale_derivative) v += lc;
        out.finalize();
        return out;
    }

    const ScaleSpeed& source() const { return source_; }

  private:
    explicit ExcessiveFunction(Direction d, DiscountRate r, ScaleSpeed src)
        : direction(d), rate(r), normalization_point(kNaN), norm_index(0),
          source_(std::move(src)), p_lo_(0), p_hi_(0) {}

    std::size_t locate(double x) const {
        if (!(x >= grid.front() && x <= grid.back()))
            throw HullError("evaluation point " + format_double(x) +
                            " outside solved hull [" + format_double(grid.front()) +
                            ", " + format_double(grid.back()) + "]");
        const auto it = std::upper_bound(grid.begin(), grid.end(), x);
        const std::size_t j = static_cast<std::size_t>(it - grid.begin());
        return j == 0 ? 0 : j - 1;
    }

    // Interpolants: monotone cubic on (p, value) where the scale stays finite
    // and strictly increasing in doubles (exact affine-in-p behavior near an
    // accessible boundary survives), log-space monotone cubic in x elsewhere.
    void finalize() {
        const std::size_t n = grid.size();
        auto node_ok = [&](std::size_t j) {
            return std::isfinite(scale_at_nodes[j]) && std::isfinite(values[j]) &&
                   values[j] > 0.0 && std::isfinite(scale_derivative[j]);
        };
        std::size_t lo = norm_index, hi = norm_index;
        while (lo > 0 && node_ok(lo - 1) && scale_at_nodes[lo - 1] < scale_at_nodes[lo])
            --lo;
        while (hi + 1 < n && node_ok(hi + 1) && scale_at_nodes[hi + 1] > scale_at_nodes[hi])
            ++hi;
        p_lo_ = lo;
        p_hi_ = hi;
        if (hi - lo + 1 >= 2) {
            std::vector<double> ps(scale_at_nodes.begin() + lo,
                                   scale_at_nodes.begin() + hi + 1);
            std::vector<double> vs(values.begin() + lo, values.begin() + hi + 1);
            std::vector<double> ds(scale_derivative.begin() + lo,
                                   scale_derivative.begin() + hi + 1);
            p_interp_ = std::make_shared<const Pchip>(ps, vs);
            p_deriv_interp_ = std::make_shared<const Pchip>(std::move(ps), std::move(ds));
        } else {
            p_interp_.reset();
            p_deriv_interp_.reset();
        }
        x_log_interp_ = std::make_shared<const Pchip>(grid, log_values);
        x_log_deriv_interp_ = std::make_shared<const Pchip>(grid, log_abs_scale_derivative);
    }

    ScaleSpeed source_;
    std::size_t p_lo_, p_hi_;
    std::shared_ptr<const Pchip> p_interp_, p_deriv_interp_;
    std::shared_ptr<const Pchip> x_log_interp_, x_log_deriv_interp_;

    friend ExcessiveFunction solve_excessive(const ScaleSpeed&, DiscountRate,
                                             Direction, GridSpec);
};

namespace detail {

// Cubic Hermite basis on [0, 1].
inline double h00(double w) { return (2.0 * w - 3.0) * w * w + 1.0; }
inline double h01(double w) { return (3.0 - 2.0 * w) * w * w; }
inline double h10(double w) { return ((w - 2.0) * w + 1.0) * w; }
inline double h11(double w) { return (w - 1.0) * w * w; }

// Kronrod abscissa weights reindexed for ascending node order.
inline double gk_weight_ascending(int i) {
    return i <= 7 ? gk::kWgk[i] : gk::kWgk[14 - i];
}

// One march cell [lo, hi] resolved in x order: the 15 Kronrod abscissae, the
// natural-log drift potential H at the 17 segment boundaries (anchored at
// h_lo, which must be the true -log p'(lo)), log speed density at abscissae,
// and log scale mass of the 16 sub-segments. H is cumulated by Simpson per
// sub-segment; masses integrate exp(-H) against a cubic Hermite model of H,
// so no coefficient call happens off the boundary/midpoint lattice.
struct CellData {
    double lo = 0, hi = 0;
    double y[15];
    double lH[17];
    double lm[15];
    double lg[16];
    double lgap = 0;
};

inline void build_cell(const ScaleSpeed& ss, double lo, double hi, double h_lo,
                       CellData& c) {
    c.lo = lo;
    c.hi = hi;
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (int j = 0; j < 7; ++j) c.y[j] = mid - half * gk::kXgk[j];
    c.y[7] = mid;
    for (int j = 6; j >= 0; --j) c.y[14 - j] = mid + half * gk::kXgk[j];

    double bnd[17];
    bnd[0] = lo;
    for (int i = 0; i < 15; ++i) bnd[i + 1] = c.y[i];
    bnd[16] = hi;

    auto h_integrand = [&](double x) {
        const double s = ss.volatility(x);
        return 2.0 * ss.drift(x) / (s * s);
    };
    double slope[17];
    for (int i = 0; i < 17; ++i) slope[i] = h_integrand(bnd[i]);

    c.lH[0] = h_lo;
    for (int s = 0; s < 16; ++s) {
        const double a = bnd[s], b = bnd[s + 1];
        const double len = b - a;
        const double sm = h_integrand(0.5 * (a + b));
        c.lH[s + 1] = c.lH[s] + len * (slope[s] + 4.0 * sm + slope[s + 1]) / 6.0;
        const double ha = c.lH[s], hb = c.lH[s + 1];
        auto neg_h_model = [&](double t) {
            const double w = (t - a) / len;
            return -(ha * h00(w) + hb * h01(w) +
                     len * (slope[s] * h10(w) + slope[s + 1] * h11(w)));
        };
        double l15, l7;
        gk::rule15_log(neg_h_model, a, b, l15, l7);
        c.lg[s] = l15;
    }
    c.lgap = logsumexp(c.lg, 16);
    for (int i = 0; i < 15; ++i) {
        const double s = ss.volatility(c.y[i]);
        c.lm[i] = kLn2 - 2.0 * std::log(s) + c.lH[i + 1];
    }
}

// Rebase the H anchor after the fact (used when the march enters at hi and
// the absolute level is only known for that end). Scale mass carries e^-H,
// so its logs shift the other way.
inline void shift_cell(CellData& c, double off) {
    if (off == 0.0) return;
    for (double& v : c.lH) v += off;
    for (double& v : c.lm) v += off;
    for (double& v : c.lg) v -= off;
    c.lgap -= off;
}

// Result of one linear cell step, everything rebased by lbeta = log of the
// affine continuation value at the exit end. c1 + c2 = 1; F2, G2 are the
// exit value and exit (slope * gap) in the same units.
struct CellStep {
    double lbeta;
    double c1, c2;
    double F2, G2;
};

// Volterra step over one cell: the exit value and scale-slope solve a 2x2
// linear system coming from a cubic Hermite model of f between the cell ends
// under the 15-point Kronrod rule. `up` says the march enters at c.lo.
// All magnitudes are assembled in log space before exponentiation, so huge
// |H| cancels exactly between scale distances and speed density.
inline CellStep solve_linear_cell(const CellData& c, bool up, double r, double Lf,
                                  double Lfp) {
    CellStep st;
    st.lbeta = logaddexp(Lf, Lfp + c.lgap);
    st.c1 = std::exp(Lf - st.lbeta);
    st.c2 = std::exp(Lfp + c.lgap - st.lbeta);

    double pre[15], suf[15];
    double run = -kInf;
    for (int i = 0; i < 15; ++i) {
        run = logaddexp(run, c.lg[i]);
        pre[i] = run;
    }
    run = -kInf;
    for (int i = 14; i >= 0; --i) {
        run = logaddexp(run, c.lg[i + 1]);
        suf[i] = run;
    }

    const double lhl = std::log(0.5 * (c.hi - c.lo));
    const double lr = std::log(r);
    double SA[4] = {0, 0, 0, 0}, SB[4] = {0, 0, 0, 0};
    for (int i = 0; i < 15; ++i) {
        const double lw = std::log(gk_weight_ascending(i)) + lhl;
        const double lfar = up ? suf[i] : pre[i];
        const double lnear = up ? pre[i] : suf[i];
        const double w = std::min(std::exp(lnear - c.lgap), 1.0);
        const double ka = std::exp(lr + lfar + c.lm[i] + lw);
        const double kb = std::exp(lr + c.lgap + c.lm[i] + lw);
        const double b00 = h00(w), b01 = h01(w), b10 = h10(w), b11 = h11(w);
        SA[0] += ka * b00;
        SA[1] += ka * b01;
        SA[2] += ka * b10;
        SA[3] += ka * b11;
        SB[0] += kb * b00;
        SB[1] += kb * b01;
        SB[2] += kb * b10;
        SB[3] += kb * b11;
    }

    const double a11 = 1.0 - SA[1], a12 = -SA[3];
    const double a21 = -SB[1], a22 = 1.0 - SB[3];
    const double rhs1 = 1.0 + SA[0] * st.c1 + SA[2] * st.c2;
    const double rhs2 = st.c2 + SB[0] * st.c1 + SB[2] * st.c2;
    const double det = a11 * a22 - a12 * a21;
    if (!(det > 1e-3))
        throw SolverError("cell system near-singular on [" + format_double(c.lo) +
                          ", " + format_double(c.hi) + "], det = " + format_double(det));
    double F2 = (rhs1 * a22 - rhs2 * a12) / det;
    double G2 = (a11 * rhs2 - a21 * rhs1) / det;
    if (!std::isfinite(F2) || !std::isfinite(G2) || F2 <= 0.0 || G2 <= 0.0)
        throw SolverError("cell step produced non-positive state on [" +
                          format_double(c.lo) + ", " + format_double(c.hi) + "]");
    // exact solutions are monotone with nondecreasing scale slope along the
    // march; anything beyond rounding-level violation is a solver defect
    const double tol = 1e-9;
    if (F2 < st.c1 * (1.0 - tol) || G2 < st.c2 * (1.0 - tol))
        throw SolverError("monotonicity violated on [" + format_double(c.lo) + ", " +
                          format_double(c.hi) + "]: F2/c1 = " + format_double(F2 / st.c1) +
                          ", G2/c2 = " + format_double(G2 / st.c2));
    st.F2 = std::max(F2, st.c1);
    st.G2 = std::max(G2, st.c2);
    return st;
}

// Re-derive the slope update of a solved cell with the quadrature refined
// one level (cell split at the midpoint, 30 abscissae) and compare. Catches
// kernels the single-panel rule under-resolved. Cells whose integral term
// sits at rounding noise relative to the carried slope are skipped; they
// cannot be measured relatively and cannot corrupt the solution either.
inline void verify_linear_cell(const ScaleSpeed& ss, double r, bool up,
                               const CellData& c, const CellStep& st) {
    CellData a, b;
    const double mid = 0.5 * (c.lo + c.hi);
    build_cell(ss, c.lo, mid, c.lH[0], a);
    build_cell(ss, mid, c.hi, a.lH[16], b);
    const double lgap2 = logaddexp(a.lgap, b.lgap);

    // 32 sub-segments in x order; abscissa i of the joined cell sits after
    // global segment i for the first half and i+1 for the second (the two
    // halves meet with a full segment on each side of the midpoint)
    double segs[32];
    for (int s = 0; s < 16; ++s) {
        segs[s] = a.lg[s];
        segs[16 + s] = b.lg[s];
    }
    double pre[30], suf[30];
    double run = -kInf;
    int sp = 0;
    for (int i = 0; i < 30; ++i) {
        const int upto = i < 15 ? i : i + 1;
        while (sp <= upto) run = logaddexp(run, segs[sp++]);
        pre[i] = run;
    }
    run = -kInf;
    sp = 31;
    for (int i = 29; i >= 0; --i) {
        const int from = i < 15 ? i + 1 : i + 2;
        while (sp >= from) run = logaddexp(run, segs[sp--]);
        suf[i] = run;
    }

    const double lr = std::log(r);
    double rI = 0.0;
    for (int i = 0; i < 30; ++i) {
        const CellData& h = i < 15 ? a : b;
        const int k = i % 15;
        const double lhl = std::log(0.5 * (h.hi - h.lo));
        const double lw = std::log(gk_weight_ascending(k)) + lhl;
        const double lnear = up ? pre[i] : suf[i];
        const double w = std::min(std::exp(lnear - lgap2), 1.0);
        const double kb = std::exp(lr + lgap2 + h.lm[k] + lw);
        rI += kb * (st.c1 * h00(w) + st.F2 * h01(w) + st.c2 * h10(w) + st.G2 * h11(w));
    }

    if (rI < 1e-8 * std::max(st.c2, 1e-12)) return;
    const double dG = st.G2 - st.c2;
    const double residual = std::abs(dG - rI) / (dG + rI + 1e-300);
    // exponent chains round at |H| * eps absolute in the logs, which exp()
    // turns into the same relative noise on every quadrature term; keep the
    // gate above that floor so coefficient-range conditioning far out in the
    // tails is not mistaken for an under-resolved kernel
    const double hmag = std::max(std::abs(c.lH[0]), std::abs(c.lH[16]));
    const double tol =
        std::max(1e-7, 16.0 * std::numeric_limits<double>::epsilon() * hmag);
    if (residual > tol)
        throw SolverError("cell residual " + format_double(residual) + " on [" +
                          format_double(c.lo) + ", " + format_double(c.hi) +
                          "] exceeds verification tolerance");
}

// Reported node set: geometric refinement of the boundary gap on each side
// of the reference point, which is node M exactly.
inline std::vector<double> reported_grid(const ScaleSpeed& ss, const GridSpec& gs,
                                         std::size_t& norm_index) {
    if (gs.node_count < 16)
        throw ConfigError("grid node count must be at least 16");
    const IntervalSpec& iv = ss.interval();
    const Compactifier comp(iv);
    const double x0 = ss.x0();

    double margin;
    if (std::isinf(iv.alpha) && std::isinf(iv.beta))
        margin = 1e-5;
    else if (std::isinf(iv.alpha) || std::isinf(iv.beta))
        margin = 1e-7;
    else
        margin = 1e-8;

    const double ga0 = comp.gap(x0, Side::alpha);
    const double gb0 = comp.gap(x0, Side::beta);
    double ga_min, gb_min;
    if (std::isnan(gs.hull_alpha)) {
        ga_min = margin;
    } else {
        if (!(gs.hull_alpha > iv.alpha && gs.hull_alpha < x0))
            throw ConfigError("hull_alpha must lie strictly between the lower "
                              "endpoint and the reference point");
        ga_min = comp.gap(gs.hull_alpha, Side::alpha);
    }
    if (std::isnan(gs.hull_beta)) {
        gb_min = margin;
    } else {
        if (!(gs.hull_beta < iv.beta && gs.hull_beta > x0))
            throw ConfigError("hull_beta must lie strictly between the reference "
                              "point and the upper endpoint");
        gb_min = comp.gap(gs.hull_beta, Side::beta);
    }
    if (!(ga_min < ga0) || !(gb_min < gb0))
        throw ConfigError("grid hull does not enclose the reference point");

    const int M = gs.node_count / 2;
    std::vector<double> grid;
    grid.reserve(2 * static_cast<std::size_t>(M) + 1);
    for (int j = M; j >= 1; --j) {
        const double g = ga0 * std::pow(ga_min / ga0, static_cast<double>(j) / M);
        grid.push_back(comp.x_at_gap(g, Side::alpha));
    }
    grid.push_back(x0);
    for (int j = 1; j <= M; ++j) {
        const double g = gb0 * std::pow(gb_min / gb0, static_cast<double>(j) / M);
        grid.push_back(comp.x_at_gap(g, Side::beta));
    }
    // the gap -> x -> gap roundtrip is sub-ulp; pin explicit hull ends exactly
    if (!std::isnan(gs.hull_alpha)) grid.front() = gs.hull_alpha;
    if (!std::isnan(gs.hull_beta)) grid.back() = gs.hull_beta;
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (std::size_t j = 0; j + 1 < grid.size(); ++j)
        if (!(grid[j] < grid[j + 1]))
            throw SolverError("grid construction produced non-monotone nodes near " +
                              format_double(grid[j]));
    norm_index = static_cast<std::size_t>(
        std::lower_bound(grid.begin(), grid.end(), x0) - grid.begin());
    if (norm_index >= grid.size() || grid[norm_index] != x0)
        throw SolverError("reference point missing from constructed grid");
    return grid;
}

// Start zone for the march. The minimal solution is the limit of solutions
// vanishing at a shrinking start point; starting where the unwanted mode has
// at least `budget` nats of decay left before the hull edge makes the
// contamination ~e^-60 there. The decay rate is 2*lambda with
// lambda = sqrt(drift^2 + 2 r vol^2) / vol^2, walked in gap coordinates with
// a hard floor at 1e-12 of the hull gap (an accessible boundary never
// accumulates the budget; the floor governs there). Returned in march order,
// deep end first, hull edge excluded.
inline std::vector<double> extension_nodes(const ScaleSpeed& ss, double r, Side side,
                                           double hull_edge) {
    const Compactifier comp(ss.interval());
    const double g0 = comp.gap(hull_edge, side);
    const double budget = 60.0;
    const double ratio = std::pow(2.0, -0.125);
    const int n_ext = 600;

    auto two_lambda = [&](double x) {
        const double b = ss.drift(x), s = ss.volatility(x);
        return 2.0 * std::sqrt(b * b + 2.0 * r * s * s) / (s * s);
    };

    std::vector<double> walk_b{0.0}, walk_lg{std::log(g0)};
    double g = g0, x_prev = hull_edge, acc = 0.0;
    while (acc < budget && g > g0 * 1e-12) {
        g *= ratio;
        const double x = comp.x_at_gap(g, side);
        if (x == x_prev) break;
        const double lo = std::min(x, x_prev), hi = std::max(x, x_prev);
        double i15, i7;
        gk::rule15(two_lambda, lo, hi, i15, i7);
        if (!std::isfinite(i15))
            throw SolverError("decay walk hit a non-finite coefficient near " +
                              format_double(x));
        acc += i15;
        walk_b.push_back(acc);
        walk_lg.push_back(std::log(g));
        x_prev = x;
    }

    double b_start = std::min(acc, budget);
    // budget level -> log gap, linear between walk samples
    auto lg_at = [&](double bv) {
        const auto it = std::lower_bound(walk_b.begin(), walk_b.end(), bv);
        if (it == walk_b.begin()) return walk_lg.front();
        if (it == walk_b.end()) return walk_lg.back();
        const std::size_t j = static_cast<std::size_t>(it - walk_b.begin());
        const double t = (bv - walk_b[j - 1]) / (walk_b[j] - walk_b[j - 1]);
        return walk_lg[j - 1] + t * (walk_lg[j] - walk_lg[j - 1]);
    };

    std::vector<double> nodes;
    nodes.reserve(n_ext);
    if (b_start >= 1e-3) {
        for (int k = 0; k < n_ext; ++k) {
            const double bv = b_start * (static_cast<double>(n_ext - k) / n_ext);
            nodes.push_back(comp.x_at_gap(std::exp(lg_at(bv)), side));
        }
    } else {
        // negligible decay in range: plain geometric gaps down to the floor
        const double lg_start = std::min(walk_lg.back(), std::log(g0 * 1e-12));
        const double lg0 = std::log(g0);
        for (int k = 0; k < n_ext; ++k) {
            const double lg = lg_start + (lg0 - lg_start) * (static_cast<double>(k) / n_ext);
            nodes.push_back(comp.x_at_gap(std::exp(lg), side));
        }
    }

    // clamp away from a finite endpoint, dedupe, enforce march monotonicity
    const IntervalSpec& iv = ss.interval();
    const double endpoint = side == Side::alpha ? iv.alpha : iv.beta;
    if (std::isfinite(endpoint)) {
        for (double& x : nodes) {
            const double ulp = std::abs(endpoint) * 4e-16 + 4e-308;
            if (side == Side::alpha && x < endpoint + ulp) x = endpoint + ulp;
            if (side == Side::beta && x > endpoint - ulp) x = endpoint - ulp;
        }
    }
    const bool ascending = side == Side::alpha;
    std::vector<double> out;
    out.reserve(nodes.size());
    for (double x : nodes) {
        if (!out.empty()) {
            if (ascending && !(x > out.back())) continue;
            if (!ascending && !(x < out.back())) continue;
        }
        out.push_back(x);
    }
    if (!out.empty()) {
        if (ascending && !(out.back() < hull_edge)) out.pop_back();
        else if (!ascending && !(out.back() > hull_edge)) out.pop_back();
    }
    if (out.size() < 16)
        throw SolverError("extension zone collapsed to " + std::to_string(out.size()) +
                          " nodes near " + format_double(hull_edge));
    return out;
}

} // namespace detail

// Minimal positive r-excessive solution, increasing or decreasing, on the
// grid described by gs. The march starts deep in the extension zone with
// Dirichlet data (value 0, unit scale slope) and carries log value and log
// scale slope; cells too steep for the Hermite kernel (lambda * dx > 1.2)
// step by a second-order exponent expansion instead. Every Hermite cell is
// re-verified against a refined quadrature before being accepted.
inline ExcessiveFunction solve_excessive(const ScaleSpeed& ss, DiscountRate rate,
                                         Direction dir, GridSpec gs = {}) {
    std::size_t norm_index = 0;
    const std::vector<double> grid = detail::reported_grid(ss, gs, norm_index);
    const std::size_t n = grid.size();
    const bool up = dir == Direction::increasing;
    const Side start_side = up ? Side::alpha : Side::beta;
    const double hull_edge = up ? grid.front() : grid.back();
    const std::vector<double> ext =
        detail::extension_nodes(ss, rate.r, start_side, hull_edge);

    std::vector<double> seq;
    seq.reserve(ext.size() + n);
    seq.insert(seq.end(), ext.begin(), ext.end());
    if (up) {
        seq.insert(seq.end(), grid.begin(), grid.end());
    } else {
        seq.insert(seq.end(), grid.rbegin(), grid.rend());
    }

    std::vector<double> Lf_g(n, kNaN), Lfp_g(n, kNaN), lgap_g(n > 0 ? n - 1 : 0, kNaN);
    auto grid_index = [&](std::size_t seq_idx) -> std::ptrdiff_t {
        if (seq_idx < ext.size()) return -1;
        const std::size_t k = seq_idx - ext.size();
        return static_cast<std::ptrdiff_t>(up ? k : n - 1 - k);
    };

    // characteristic roots of (s^2/2) u^2 + b u = r. The root opposing the
    // drift sign is a near-cancellation of b against the discriminant for
    // large |b|; it is recovered from the root product -2r/s^2 instead.
    auto u0_signed = [&](double x) {
        const double b = ss.drift(x), s = ss.volatility(x);
        const double s2 = s * s;
        const double disc = std::sqrt(b * b + 2.0 * rate.r * s2);
        const double big = (b >= 0.0 ? -b - disc : -b + disc) / s2;
        const double small = -2.0 * rate.r / (s2 * big);
        if (up) return b >= 0.0 ? small : big;
        return b >= 0.0 ? big : small;
    };
    // stiffness metric for the cell mode: the larger characteristic root in
    // magnitude, which also bounds the log scale-density slope. A cell where
    // either the solution or the kernel varies faster than the Hermite/GK15
    // pair can resolve must step by the exponent expansion instead.
    auto stiffness = [&](double x) {
        const double b = ss.drift(x), s = ss.volatility(x);
        const double disc = std::sqrt(b * b + 2.0 * rate.r * s * s);
        return (std::abs(b) + disc) / (s * s);
    };
    auto h_integrand = [&](double x) {
        const double s = ss.volatility(x);
        return 2.0 * ss.drift(x) / (s * s);
    };

    double Lf = -kInf, Lfp = 0.0;
    double h_run = -ss.log_scale_density(seq.front());

    detail::CellData cell;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
        const double x_from = seq[i], x_to = seq[i + 1];
        const double lo = std::min(x_from, x_to), hi = std::max(x_from, x_to);
        const double dx = hi - lo;
        const double lam = std::max({stiffness(lo), stiffness(0.5 * (lo + hi)),
                                     stiffness(hi)});
        const std::ptrdiff_t gi_from = grid_index(i);
        const std::ptrdiff_t gi_to = grid_index(i + 1);

        if (lam * dx > 1.2) {
            // exponent expansion: f' = u f with u = u0 + u1, u0 the growing
            // characteristic root along the march and u1 the curvature
            // correction; valid only while the correction stays subdominant
            auto u_total = [&](double x) {
                const double b = ss.drift(x), s = ss.volatility(x);
                const double s2 = s * s;
                const double u0 = u0_signed(x);
                double eps = 1e-5 * (1.0 + std::abs(x));
                const IntervalSpec& iv = ss.interval();
                if (std::isfinite(iv.alpha)) eps = std::min(eps, 0.45 * (x - iv.alpha));
                if (std::isfinite(iv.beta)) eps = std::min(eps, 0.45 * (iv.beta - x));
                const double u0p = (u0_signed(x + eps) - u0_signed(x - eps)) / (2.0 * eps);
                const double u1 = -s2 * u0p / (2.0 * (s2 * u0 + b));
                if (!(std::abs(u1) < 0.5 * std::abs(u0)))
                    throw SolverError("exponent correction too large at x = " +
                                      format_double(x) +
                                      "; cell spacing outruns the expansion");
                return u0 + u1;
            };
            // exponent integrals feed log magnitudes in divergence regimes;
            // relative 1e-9 is far below anything read off them
            QuadratureOptions wkb_opt;
            wkb_opt.rel_tol = 1e-9;
            const double dLf = integrate(u_total, x_from, x_to, wkb_opt);
            if (!(dLf > 0.0))
                throw SolverError("non-growing exponent step on [" + format_double(lo) +
                                  ", " + format_double(hi) + "]");
            const double dH = integrate(h_integrand, x_from, x_to, wkb_opt);
            const double u_from = u_total(x_from), u_to = u_total(x_to);
            Lf += dLf;
            Lfp += dLf + std::log(std::abs(u_to) / std::abs(u_from)) + dH;
            h_run += dH;
            if (gi_from >= 0 && gi_to >= 0) {
                const std::size_t cidx = static_cast<std::size_t>(std::min(gi_from, gi_to));
                // scale mass across a steep cell; values saturate out here, a
                // two-point bound keeps the node scales monotone
                const double hf = up ? h_run - dH : h_run;
                const double ht = up ? h_run : h_run - dH;
                lgap_g[cidx] = logaddexp(-hf, -ht) + std::log(0.5 * dx);
            }
        } else {
            const double h_anchor_rel = up ? h_run : 0.0;
            detail::build_cell(ss, lo, hi, h_anchor_rel, cell);
            if (!up) detail::shift_cell(cell, h_run - cell.lH[16]);
            const detail::CellStep st = detail::solve_linear_cell(cell, up, rate.r, Lf, Lfp);
            detail::verify_linear_cell(ss, rate.r, up, cell, st);
            Lf = st.lbeta + std::log(st.F2);
            Lfp = st.lbeta + std::log(st.G2) - cell.lgap;
            h_run = up ? cell.lH[16] : cell.lH[0];
            if (gi_from >= 0 && gi_to >= 0)
                lgap_g[static_cast<std::size_t>(std::min(gi_from, gi_to))] = cell.lgap;
        }
        if (!std::isfinite(Lfp) || std::isnan(Lf))
            throw SolverError("march state lost precision near x = " + format_double(x_to));
        const std::ptrdiff_t gi = gi_to;
        if (gi >= 0) {
            Lf_g[static_cast<std::size_t>(gi)] = Lf;
            Lfp_g[static_cast<std::size_t>(gi)] = Lfp;
        }
    }

    const double Lf_norm = Lf_g[norm_index];
    if (!std::isfinite(Lf_norm))
        throw SolverError("normalization point was not reached by the march");

    ExcessiveFunction out(dir, rate, ss);
    out.grid = grid;
    out.normalization_point = ss.x0();
    out.norm_index = norm_index;
    out.values.resize(n);
    out.log_values.resize(n);
    out.scale_derivative.resize(n);
    out.log_abs_scale_derivative.resize(n);
    out.scale_at_nodes.resize(n);
    const double sign = up ? 1.0 : -1.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double lv = Lf_g[j] - Lf_norm;
        if (lv > gs.max_log_value)
            throw SolverError("value overflow at x = " + format_double(grid[j]) +
                              ": log value " + format_double(lv) +
                              " exceeds the configured bound; the grid must stop "
                              "strictly inside the state interval");
        out.log_values[j] = lv;
        out.values[j] = std::exp(lv);
        out.log_abs_scale_derivative[j] = Lfp_g[j] - Lf_norm;
        out.scale_derivative[j] = sign * std::exp(Lfp_g[j] - Lf_norm);
    }
    out.values[norm_index] = 1.0;
    out.log_values[norm_index] = 0.0;

    out.scale_at_nodes[norm_index] = 0.0;
    for (std::size_t j = norm_index; j + 1 < n; ++j)
        out.scale_at_nodes[j + 1] = out.scale_at_nodes[j] + std::exp(lgap_g[j]);
    for (std::size_t j = norm_index; j > 0; --j)
        out.scale_at_nodes[j - 1] = out.scale_at_nodes[j] - std::exp(lgap_g[j - 1]);

    out.finalize();
    return out;
}

} // namespace diffmart
