#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "diffmart/diffusion.hpp"
#include "diffmart/errors.hpp"
#include "diffmart/interval.hpp"
#include "diffmart/numerics.hpp"

namespace diffmart {

// Engine for improper integrals toward an endpoint. The integral is split
// along a truncation ladder that approaches the endpoint geometrically in
// compactified gap units; the log increments over consecutive panels are then
// read for one of three outcomes: settled (tail negligible, or stably
// geometric and completed in closed form), diverged (partial sums over the
// cap, or increments that refuse to decay while the panels keep shrinking),
// or neither, which is reported as an explicit inconclusive error.

struct ImproperOptions {
    int max_points = 40;       // ladder points after the starting one
    double gap_ratio = 0.5;    // geometric factor per step, in gap units
    double log_cap = 27.631021115928547;  // log 1e12: partial sums above this diverge
    double h_limit = 1e6;      // |H| guard: beyond it quadrature noise drowns slopes
    double min_gap = 0.0;      // ladder floor in gap units (0 = none)
};

// Truncated improper integral with its diagnostics, in plain (exp) domain.
// diverged implies value = +inf. partial_sums[0] = 0 is the zero-width sum.
struct ExtendedRealVerdict {
    double value = 0.0;
    bool diverged = false;
    std::vector<double> partial_sums;
    std::vector<double> truncation_points;
};

namespace detail {

struct Ladder {
    std::vector<double> points; // anchor first, marching toward the endpoint
    bool range_limited = false; // stopped by the |H| guard, not by the budget
};

inline Ladder truncation_ladder(const ScaleSpeed& ss, double start, Side side,
                                const ImproperOptions& opt) {
    const Compactifier comp(ss.interval());
    Ladder lad;
    lad.points.push_back(start);
    double g = comp.gap(start, side);
    for (int k = 0; k < opt.max_points; ++k) {
        g *= opt.gap_ratio;
        if (g <= opt.min_gap) break;
        const double t = comp.x_at_gap(g, side);
        const bool advanced =
            side == Side::beta ? t > lad.points.back() : t < lad.points.back();
        if (!advanced || !ss.interval().contains_interior(t)) break;
        if (std::abs(ss.log_scale_density(t)) > opt.h_limit) {
            lad.range_limited = true;
            break;
        }
        lad.points.push_back(t);
    }
    return lad;
}

enum class TailOutcome { settled, diverged, inconclusive };

struct TailDecision {
    TailOutcome outcome = TailOutcome::inconclusive;
    double log_total = kNaN; // settled only; includes the geometric completion
};

// Decision rules over log increments, in precedence order:
//   1. partial sum above the cap diverges;
//   2. last <= 5 increments below 1e-8 of the total settle it as is;
//   3. last 5 increments with log ratios agreeing within 0.02 and ratio
//      below 0.97 settle it, completing the tail as a geometric series;
//   4. last 5 increments nondecreasing (1e-4 log slack) while the panels
//      kept shrinking geometrically means divergence;
//   5. decreasing increments whose decrements collapse by at least half per
//      panel settle at a positive level (the future decay is bounded by the
//      last decrement), which also means divergence.
// Anything else is inconclusive: the caller must refuse to guess.
inline TailDecision decide_tail(const std::vector<double>& ld, double log_sum,
                                const ImproperOptions& opt) {
    const std::size_t n = ld.size();
    if (log_sum == -kInf) return {TailOutcome::settled, -kInf};
    if (log_sum > opt.log_cap) return {TailOutcome::diverged, kInf};
    {
        const std::size_t m = std::min<std::size_t>(5, n);
        double tail = -kInf;
        for (std::size_t i = n - m; i < n; ++i) tail = logaddexp(tail, ld[i]);
        if (tail < log_sum - 18.420680743952367) // log 1e-8
            return {TailOutcome::settled, log_sum};
    }
    if (n >= 5) {
        double diffs[4];
        double mean = 0.0;
        bool finite = true;
        for (int i = 0; i < 4; ++i) {
            diffs[i] = ld[n - 4 + i] - ld[n - 5 + i];
            if (!std::isfinite(diffs[i])) finite = false;
            mean += 0.25 * diffs[i];
        }
        if (finite) {
            bool stable = true;
            for (double d : diffs)
                if (std::abs(d - mean) > 0.02) stable = false;
            const double q = std::exp(mean);
            if (stable && q < 0.97)
                return {TailOutcome::settled,
                        logaddexp(log_sum, ld[n - 1] + std::log(q / (1.0 - q)))};
        }
        bool nondec = true;
        for (std::size_t i = n - 4; i < n; ++i)
            if (ld[i] < ld[i - 1] - 1e-4) nondec = false;
        if (nondec) return {TailOutcome::diverged, kInf};

        // logarithmic divergence shows up as increments sliding down onto a
        // positive plateau; certify the plateau instead of the slide
        double d[5];
        for (int i = 0; i < 5; ++i) d[i] = std::exp(ld[n - 5 + i]);
        double dec[4];
        bool collapsing = std::isfinite(d[0]);
        for (int i = 0; i < 4; ++i) {
            dec[i] = d[i] - d[i + 1];
            if (!(dec[i] > 0.0)) collapsing = false;
        }
        for (int i = 1; i < 4 && collapsing; ++i)
            if (dec[i] > 0.5 * dec[i - 1]) collapsing = false;
        // future decay <= dec[3] * (1/2)/(1 - 1/2), so the increments stay
        // above 95% of the last one: the sum keeps climbing at that pace
        if (collapsing && dec[3] <= 0.05 * d[4]) return {TailOutcome::diverged, kInf};
    }
    return {TailOutcome::inconclusive, kNaN};
}

struct ImproperResult {
    enum class Outcome { settled, diverged };
    Outcome outcome = Outcome::settled;
    double log_value = -kInf; // settled: completed total; diverged: +inf
    std::vector<double> points;
    std::vector<double> log_increments;
    std::vector<double> log_partial_sums; // one longer than increments; starts at -inf
};

// Accumulates increment_fn over consecutive ladder panels (called once per
// panel, in order) and applies the tail rules. Divergence can exit early once
// the cap is passed with non-collapsing increments; settling always reads the
// full ladder. Inconclusive outcomes throw.
template <class IncrementFn>
inline ImproperResult improper_log_sum(const Ladder& lad, IncrementFn&& increment_fn,
                                       const ImproperOptions& opt, const std::string& what) {
    if (lad.points.size() < 2)
        throw InconclusiveError(what +
                                ": truncation ladder has no usable points "
                                "(coefficient range exhausted immediately)");
    ImproperResult res;
    res.points = lad.points;
    res.log_partial_sums.push_back(-kInf);
    double log_sum = -kInf;
    for (std::size_t k = 0; k + 1 < lad.points.size(); ++k) {
        const double d = increment_fn(lad.points[k], lad.points[k + 1]);
        res.log_increments.push_back(d);
        log_sum = logaddexp(log_sum, d);
        res.log_partial_sums.push_back(log_sum);
        const std::size_t m = res.log_increments.size();
        if (log_sum > opt.log_cap && m >= 2 &&
            res.log_increments[m - 1] >= res.log_increments[m - 2] - 1e-4) {
            res.outcome = ImproperResult::Outcome::diverged;
            res.log_value = kInf;
            res.points.resize(m + 1);
            return res;
        }
    }
    const TailDecision td = decide_tail(res.log_increments, log_sum, opt);
    if (td.outcome == TailOutcome::settled) {
        res.outcome = ImproperResult::Outcome::settled;
        res.log_value = td.log_total;
        return res;
    }
    if (td.outcome == TailOutcome::diverged) {
        res.outcome = ImproperResult::Outcome::diverged;
        res.log_value = kInf;
        return res;
    }
    std::string tail_str;
    const std::size_t show = std::min<std::size_t>(5, res.log_increments.size());
    for (std::size_t i = res.log_increments.size() - show; i < res.log_increments.size(); ++i)
        tail_str += (tail_str.empty() ? "" : ", ") + format_double(res.log_increments[i]);
    throw InconclusiveError(what +
                            ": partial sums neither settled nor clearly diverged within "
                            "the truncation budget (last log increments: " +
                            tail_str + ")");
}

inline ExtendedRealVerdict to_verdict(const ImproperResult& r) {
    ExtendedRealVerdict v;
    v.diverged = r.outcome == ImproperResult::Outcome::diverged;
    v.value = v.diverged ? kInf : std::exp(r.log_value);
    v.truncation_points = r.points;
    v.partial_sums.reserve(r.log_partial_sums.size());
    for (double ls : r.log_partial_sums) v.partial_sums.push_back(std::exp(ls));
    return v;
}

} // namespace detail

} // namespace diffmart
