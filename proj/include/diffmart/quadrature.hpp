#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "diffmart/errors.hpp"
#include "diffmart/numerics.hpp"

namespace diffmart {

struct QuadratureOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_depth = 60;
};

namespace gk {

// 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK dqk15).
// kXgk holds the nonnegative abscissae; odd indices plus the center are the
// Gauss points.
inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

// Both rules evaluated on [a, b]; f must be callable at interior points only
// (no abscissa touches an endpoint).
template <class F>
inline void rule15(F&& f, double a, double b, double& i15, double& i7) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double resk = kWgk[7] * fc;
    double resg = kWg[3] * fc;
    for (int j = 0; j < 3; ++j) {
        const int k = 2 * j + 1; // Gauss abscissae
        const double dx = h * kXgk[k];
        const double fsum = f(c - dx) + f(c + dx);
        resk += kWgk[k] * fsum;
        resg += kWg[j] * fsum;
    }
    for (int j = 0; j < 4; ++j) {
        const int k = 2 * j; // Kronrod-only abscissae
        const double dx = h * kXgk[k];
        resk += kWgk[k] * (f(c - dx) + f(c + dx));
    }
    i15 = resk * h;
    i7 = resg * h;
}

// Log-domain variant: lf returns log of a nonnegative integrand and the rule
// value is accumulated by logsumexp, so integrands like exp(x^2) are handled
// far beyond double range. Returns log of the two rule values.
template <class F>
inline void rule15_log(F&& lf, double a, double b, double& l15, double& l7) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double lh = std::log(h);
    double terms15[15];
    double terms7[7];
    int n15 = 0, n7 = 0;
    const double lfc = lf(c);
    terms15[n15++] = std::log(kWgk[7]) + lfc;
    terms7[n7++] = std::log(kWg[3]) + lfc;
    for (int j = 0; j < 3; ++j) {
        const int k = 2 * j + 1;
        const double dx = h * kXgk[k];
        const double f1 = lf(c - dx), f2 = lf(c + dx);
        terms15[n15++] = std::log(kWgk[k]) + f1;
        terms15[n15++] = std::log(kWgk[k]) + f2;
        terms7[n7++] = std::log(kWg[j]) + f1;
        terms7[n7++] = std::log(kWg[j]) + f2;
    }
    for (int j = 0; j < 4; ++j) {
        const int k = 2 * j;
        const double dx = h * kXgk[k];
        terms15[n15++] = std::log(kWgk[k]) + lf(c - dx);
        terms15[n15++] = std::log(kWgk[k]) + lf(c + dx);
    }
    l15 = logsumexp(terms15, n15) + lh;
    l7 = logsumexp(terms7, n7) + lh;
}

} // namespace gk

// Adaptive bisection with the GK15 rule. Integrands are expected smooth away
// from endpoints; a subinterval that cannot reach tolerance by max_depth is
// reported as the offender (typically a non-integrable interior singularity).
template <class F>
double integrate(F&& f, double a, double b, QuadratureOptions opt = {}) {
    if (std::isnan(a) || std::isnan(b) || std::isinf(a) || std::isinf(b))
        throw QuadratureError("integrate: endpoints must be finite, got [" +
                                  format_double(a) + ", " + format_double(b) + "]",
                              a, b);
    if (a == b) return 0.0;
    if (a > b) return -integrate(f, b, a, opt);

    struct Panel {
        double a, b;
        int depth;
    };
    std::vector<Panel> stack{{a, b, 0}};
    const double total_len = b - a;
    double total = 0.0;
    std::size_t panels = 0;
    while (!stack.empty()) {
        Panel p = stack.back();
        stack.pop_back();
        if (++panels > 200000)
            throw QuadratureError("integrate: panel budget exhausted on [" +
                                      format_double(p.a) + ", " + format_double(p.b) + "]",
                                  p.a, p.b);
        double i15, i7;
        gk::rule15(f, p.a, p.b, i15, i7);
        if (std::isnan(i15) || std::isinf(i15))
            throw QuadratureError("integrate: integrand not finite on [" +
                                      format_double(p.a) + ", " + format_double(p.b) + "]",
                                  p.a, p.b);
        const double err = std::abs(i15 - i7);
        const double allow =
            opt.abs_tol * ((p.b - p.a) / total_len) + opt.rel_tol * std::abs(i15);
        if (err <= allow || err <= 4e-16 * std::abs(i15)) {
            total += i15;
            continue;
        }
        if (p.depth >= opt.max_depth)
            throw QuadratureError("integrate: tolerance not reached on [" +
                                      format_double(p.a) + ", " + format_double(p.b) +
                                      "] at bisection depth limit",
                                  p.a, p.b);
        const double m = 0.5 * (p.a + p.b);
        stack.push_back({m, p.b, p.depth + 1});
        stack.push_back({p.a, m, p.depth + 1});
    }
    return total;
}

// Adaptive GK15 for a nonnegative integrand given by its logarithm; returns
// log of the integral (-inf for zero mass). The convergence test is relative
// (|1 - I7/I15|), and a panel more than e^-120 below the largest panel seen
// is accepted outright since it cannot move the result.
template <class F>
double log_integrate(F&& lf, double a, double b, QuadratureOptions opt = {}) {
    if (std::isnan(a) || std::isnan(b) || std::isinf(a) || std::isinf(b))
        throw QuadratureError("log_integrate: endpoints must be finite, got [" +
                                  format_double(a) + ", " + format_double(b) + "]",
                              a, b);
    if (a == b) return -kInf;
    if (a > b)
        throw QuadratureError("log_integrate: requires a <= b", a, b);

    struct Panel {
        double a, b;
        int depth;
    };
    std::vector<Panel> stack{{a, b, 0}};
    double total = -kInf;
    double scale = -kInf; // largest panel value seen, floor reference
    std::size_t panels = 0;
    while (!stack.empty()) {
        Panel p = stack.back();
        stack.pop_back();
        if (++panels > 200000)
            throw QuadratureError("log_integrate: panel budget exhausted on [" +
                                      format_double(p.a) + ", " + format_double(p.b) + "]",
                                  p.a, p.b);
        double l15, l7;
        gk::rule15_log(lf, p.a, p.b, l15, l7);
        if (std::isnan(l15) || l15 == kInf)
            throw QuadratureError("log_integrate: integrand not finite on [" +
                                      format_double(p.a) + ", " + format_double(p.b) + "]",
                                  p.a, p.b);
        if (l15 > scale) scale = l15;
        if (l15 == -kInf) continue; // no mass on this panel
        // |l7 - l15| is the relative disagreement of the two rules for small
        // differences. Huge log magnitudes carry rounding noise proportional
        // to |l15| through logsumexp, hence the magnitude-scaled floor.
        const double log_diff = std::abs(l7 - l15);
        const double allow = std::max(opt.rel_tol, 2e-13 * std::abs(l15));
        const bool negligible = l15 < logaddexp(total, scale) - 120.0;
        if (log_diff <= allow || negligible) {
            total = logaddexp(total, l15);
            continue;
        }
        if (p.depth >= opt.max_depth)
            throw QuadratureError("log_integrate: tolerance not reached on [" +
                                      format_double(p.a) + ", " + format_double(p.b) +
                                      "] at bisection depth limit",
                                  p.a, p.b);
        const double m = 0.5 * (p.a + p.b);
        stack.push_back({m, p.b, p.depth + 1});
        stack.push_back({p.a, m, p.depth + 1});
    }
    return total;
}

} // namespace diffmart
