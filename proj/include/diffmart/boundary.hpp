#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "diffmart/diffusion.hpp"
#include "diffmart/errors.hpp"
#include "diffmart/improper.hpp"
#include "diffmart/interval.hpp"
#include "diffmart/numerics.hpp"

namespace diffmart {

// Endpoint classification by the two integral tests. With x an interior
// reference point and m([a,b[) the speed mass,
//   access toward beta:  int_x^beta m([x,y[) p(dy)
//   nature toward beta:  int_x^beta m([y,beta[) p(dy)
// (mirrored toward alpha). The endpoint is accessible iff the access integral
// is finite; an inaccessible endpoint is natural iff the nature integral
// diverges too, and entrance otherwise. Neither verdict depends on the choice
// of x.

enum class FellerVariant { access, nature };

enum class BoundaryKind { Accessible, InaccessibleNatural, InaccessibleEntrance };

inline const char* boundary_kind_name(BoundaryKind k) {
    switch (k) {
        case BoundaryKind::Accessible: return "Accessible";
        case BoundaryKind::InaccessibleNatural: return "InaccessibleNatural";
        case BoundaryKind::InaccessibleEntrance: return "InaccessibleEntrance";
    }
    return "?";
}

struct BoundaryClass {
    BoundaryKind kind = BoundaryKind::InaccessibleNatural;
    Side side = Side::alpha;
    double access_value = kInf; // extended real
    double nature_value = kNaN; // NaN when not evaluated (access was finite)
    ExtendedRealVerdict access;
    ExtendedRealVerdict nature; // empty truncation list when not evaluated
};

inline ExtendedRealVerdict improper_feller_integral(const ScaleSpeed& ss, double x_ref,
                                                    Side side, FellerVariant variant) {
    if (!ss.interval().contains_interior(x_ref))
        throw HullError("feller integral: reference point " + format_double(x_ref) +
                        " is not interior to (" + format_double(ss.interval().alpha) + ", " +
                        format_double(ss.interval().beta) + ")");
    const ImproperOptions opt;
    const detail::Ladder lad = detail::truncation_ladder(ss, x_ref, side, opt);
    const std::string what = ss.spec().name + " " + side_name(side) + " " +
                             (variant == FellerVariant::access ? "access" : "nature") +
                             " integral";
    const bool beta = side == Side::beta;

    // panel arguments arrive in ladder order (first = nearer to x_ref);
    // orient them for the increasing-argument quadrature contract
    auto speed_seg = [&](double a, double b) {
        return beta ? ss.log_speed_increment(a, b) : ss.log_speed_increment(b, a);
    };
    auto outer = [&](auto&& log_inner, double a, double b) {
        auto log_f = [&](double y) { return log_inner(y) + ss.log_scale_density(y); };
        return beta ? log_integrate(log_f, a, b) : log_integrate(log_f, b, a);
    };

    if (variant == FellerVariant::access) {
        double lm = -kInf; // log speed mass from x_ref to the panel's near edge
        auto inc = [&](double a, double b) {
            auto log_inner = [&](double y) {
                return logaddexp(lm, beta ? ss.log_speed_increment(a, y)
                                          : ss.log_speed_increment(y, a));
            };
            const double d = outer(log_inner, a, b);
            lm = logaddexp(lm, speed_seg(a, b));
            return d;
        };
        return detail::to_verdict(detail::improper_log_sum(lad, inc, opt, what));
    }

    // nature: the inner mass runs from y to the endpoint. It is seeded by a
    // tail estimate at the deepest ladder point and chained backward with
    // logaddexp, so no near-equal masses are ever subtracted.
    if (lad.points.size() < 2)
        throw InconclusiveError(what +
                                ": truncation ladder has no usable points "
                                "(coefficient range exhausted immediately)");
    ImproperOptions sub_opt = opt;
    sub_opt.max_points = 60;
    const detail::Ladder sub = detail::truncation_ladder(ss, lad.points.back(), side, sub_opt);
    double seed = -kInf;
    bool seed_diverged = false;
    if (sub.range_limited) {
        // Quadrature range exhausted before the tail could be read. Decide by
        // where H was heading: the speed density is (2/sigma^2) e^H, so H
        // falling past -1e6 means the remaining mass is below representable,
        // while H rising past +1e6 means it is effectively infinite.
        const auto& sp = sub.points;
        const double tip = sp.back();
        const double prev =
            sp.size() >= 2 ? sp[sp.size() - 2] : lad.points[lad.points.size() - 2];
        const double h_tip = -ss.log_scale_density(tip);
        const double h_prev = -ss.log_scale_density(prev);
        if (h_tip > h_prev) {
            seed_diverged = true;
        } else {
            double s = -kInf;
            for (std::size_t j = 0; j + 1 < sp.size(); ++j)
                s = logaddexp(s, speed_seg(sp[j], sp[j + 1]));
            seed = s;
        }
    } else if (sub.points.size() < 2) {
        throw InconclusiveError(what + ": inner tail ladder has no usable points");
    } else {
        const auto r = detail::improper_log_sum(
            sub, [&](double a, double b) { return speed_seg(a, b); }, sub_opt,
            what + " (inner speed tail)");
        if (r.outcome == detail::ImproperResult::Outcome::diverged)
            seed_diverged = true;
        else
            seed = r.log_value;
    }
    if (seed_diverged) {
        // infinite speed mass next to the endpoint makes the integrand
        // pointwise infinite; no outer panel is worth evaluating
        ExtendedRealVerdict v;
        v.diverged = true;
        v.value = kInf;
        v.partial_sums = {0.0};
        v.truncation_points = {x_ref};
        return v;
    }

    const auto& tp = lad.points;
    const std::size_t n = tp.size();
    std::vector<double> lseg(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) lseg[k] = speed_seg(tp[k], tp[k + 1]);
    std::vector<double> tail_mass(n); // log m from tp[k] to the endpoint
    tail_mass[n - 1] = seed;
    for (std::size_t k = n - 1; k-- > 0;) tail_mass[k] = logaddexp(tail_mass[k + 1], lseg[k]);

    std::size_t panel = 0;
    auto inc = [&](double a, double b) {
        const std::size_t k = panel++;
        auto log_inner = [&](double y) {
            return logaddexp(tail_mass[k + 1], beta ? ss.log_speed_increment(y, tp[k + 1])
                                                    : ss.log_speed_increment(tp[k + 1], y));
        };
        return outer(log_inner, a, b);
    };
    return detail::to_verdict(detail::improper_log_sum(lad, inc, opt, what));
}

// Runs the access test first; only an inaccessible endpoint needs the nature
// test to split natural from entrance.
inline BoundaryClass classify_boundary(const ScaleSpeed& ss, Side side, double x_ref) {
    BoundaryClass out;
    out.side = side;
    out.access = improper_feller_integral(ss, x_ref, side, FellerVariant::access);
    if (!out.access.diverged) {
        out.kind = BoundaryKind::Accessible;
        out.access_value = out.access.value;
        return out;
    }
    out.access_value = kInf;
    out.nature = improper_feller_integral(ss, x_ref, side, FellerVariant::nature);
    out.nature_value = out.nature.diverged ? kInf : out.nature.value;
    out.kind = out.nature.diverged ? BoundaryKind::InaccessibleNatural
                                   : BoundaryKind::InaccessibleEntrance;
    return out;
}

inline BoundaryClass classify_boundary(const ScaleSpeed& ss, Side side) {
    return classify_boundary(ss, side, ss.x0());
}

} // namespace diffmart
