#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "diffmart/errors.hpp"
#include "diffmart/interval.hpp"
#include "diffmart/numerics.hpp"
#include "diffmart/quadrature.hpp"

namespace diffmart {

// Coefficient description of a one-dimensional regular diffusion on the
// interior of `interval`. reference_point is the interior anchor x0 for the
// scale function and for normalizations downstream.
struct DiffusionSpec {
    IntervalSpec interval;
    std::function<double(double)> drift;
    std::function<double(double)> volatility;
    double reference_point = kNaN;
    std::string name = "custom";

    // Structural checks plus coefficient spot checks on a fixed probe grid.
    // Regularity everywhere is uncheckable from code; nine interior probes
    // catch the common configuration mistakes (vanishing or negative sigma,
    // a pole sitting at a probe point, swapped endpoints).
    void validate() const {
        interval.validate();
        if (!drift) throw ConfigError("diffusion spec: drift is not set");
        if (!volatility) throw ConfigError("diffusion spec: volatility is not set");
        if (!std::isfinite(reference_point) || !interval.contains_interior(reference_point))
            throw ConfigError("diffusion spec: reference_point " + format_double(reference_point) +
                              " must lie strictly inside the interval (" +
                              format_double(interval.alpha) + ", " + format_double(interval.beta) +
                              ")");
        const Compactifier comp(interval);
        const double w = comp.gap(reference_point, Side::alpha) + comp.gap(reference_point, Side::beta);
        std::vector<double> probes{reference_point};
        for (int j = 1; j <= 9; ++j) probes.push_back(comp.x_at_gap(w * j / 10.0, Side::alpha));
        for (double x : probes) {
            if (!interval.contains_interior(x)) continue;
            const double b = drift(x);
            const double s = volatility(x);
            if (!std::isfinite(b))
                throw ConfigError("diffusion spec: drift is not finite at x = " + format_double(x));
            if (!std::isfinite(s) || s <= 0.0)
                throw ConfigError("diffusion spec: volatility must be positive and finite, got " +
                                  format_double(s) + " at x = " + format_double(x));
        }
    }
};

// Interior point used when a config gives no reference point: 0 on the whole
// line, endpoint plus/minus one on a half line, midpoint of a finite interval.
inline double default_reference_point(const IntervalSpec& iv) {
    const bool ia = std::isinf(iv.alpha), ib = std::isinf(iv.beta);
    if (ia && ib) return 0.0;
    if (!ia && !ib) return 0.5 * (iv.alpha + iv.beta);
    return ia ? iv.beta - 1.0 : iv.alpha + 1.0;
}

// Scale function and speed measure derived from the coefficients.
//
// The only directly integrated quantity is H(x) = int_{x0}^{x} 2 b/sigma^2 du;
// everything else is expressed through it:
//   log p'(x) = -H(x)
//   log m'(x) = log 2 - 2 log sigma(x) + H(x)
// so the defining relation m' sigma^2 p' = 2 holds to rounding by
// construction. H values are memoised on an anchor map so each evaluation
// costs one short quadrature from the nearest previously computed point.
//
// Copies share the cache; the class is a value type over a shared immutable
// spec plus an internally synchronised memo.
class ScaleSpeed {
  public:
    explicit ScaleSpeed(DiffusionSpec spec) : impl_(std::make_shared<Impl>(std::move(spec))) {
        impl_->spec.validate();
    }

    const DiffusionSpec& spec() const { return impl_->spec; }
    const IntervalSpec& interval() const { return impl_->spec.interval; }
    double x0() const { return impl_->spec.reference_point; }

    double drift(double x) const { return impl_->spec.drift(x); }
    double volatility(double x) const { return impl_->spec.volatility(x); }

    double log_scale_density(double x) const { return -impl_->h(x); }
    double scale_density(double x) const { return std::exp(-impl_->h(x)); }
    double log_speed_density(double x) const { return impl_->log_m(x); }
    double speed_density(double x) const { return std::exp(impl_->log_m(x)); }

    // log of p(b) - p(a); requires alpha < a <= b < beta. Returns -inf for
    // a == b. The result can exceed log(DBL_MAX); exp-ing it to +inf then
    // reflects a genuinely out-of-range increment, not a failure.
    double log_scale_increment(double a, double b) const {
        return impl_->log_increment(a, b, /*speed=*/false);
    }

    // log of the speed mass m([a, b]); same domain contract.
    double log_speed_increment(double a, double b) const {
        return impl_->log_increment(a, b, /*speed=*/true);
    }

    // Signed scale value with the anchor p(x0) = 0 (exact at x0).
    double scale(double x) const {
        const double x0 = impl_->spec.reference_point;
        if (x == x0) return 0.0;
        if (x < x0) return -std::exp(impl_->log_increment(x, x0, false));
        return std::exp(impl_->log_increment(x0, x, false));
    }

  private:
    struct Impl {
        DiffusionSpec spec;
        mutable std::mutex mu;
        mutable std::map<double, double> anchors; // x -> H(x), seeded lazily with (x0, 0)

        explicit Impl(DiffusionSpec s) : spec(std::move(s)) {}

        double h_integrand(double u) const {
            const double s = spec.volatility(u);
            return 2.0 * spec.drift(u) / (s * s);
        }

        double log_m(double x) const {
            return kLn2 - 2.0 * std::log(spec.volatility(x)) + h(x);
        }

        // Splits [lo, hi] so each piece spans a bounded ratio of distances to
        // the nearest finite endpoint. One adaptive call has about 2^60 of
        // dynamic range; a coefficient singularity at a finite endpoint can
        // need far more across many decades, so long spans are integrated in
        // geometric runs.
        void ladder(double lo, double hi, std::vector<double>& pts) const {
            constexpr double kMaxRatio = 1e6;
            pts.clear();
            pts.push_back(lo);
            const IntervalSpec& iv = spec.interval;
            if (std::isfinite(iv.alpha) && lo > iv.alpha) {
                const double r = (hi - iv.alpha) / (lo - iv.alpha);
                if (r > kMaxRatio) {
                    const int n = static_cast<int>(std::ceil(std::log(r) / std::log(kMaxRatio)));
                    for (int j = 1; j < n; ++j)
                        pts.push_back(iv.alpha + (lo - iv.alpha) * std::pow(r, double(j) / n));
                }
            }
            if (std::isfinite(iv.beta) && hi < iv.beta) {
                const double r = (iv.beta - lo) / (iv.beta - hi);
                if (r > kMaxRatio) {
                    const int n = static_cast<int>(std::ceil(std::log(r) / std::log(kMaxRatio)));
                    for (int j = 1; j < n; ++j)
                        pts.push_back(iv.beta - (iv.beta - hi) * std::pow(r, double(j) / n));
                }
            }
            pts.push_back(hi);
            std::sort(pts.begin(), pts.end());
            pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        }

        double h(double x) const {
            if (!spec.interval.contains_interior(x))
                throw HullError("scale/speed evaluation at x = " + format_double(x) +
                                " outside the open interval (" + format_double(spec.interval.alpha) +
                                ", " + format_double(spec.interval.beta) + ")");
            std::lock_guard<std::mutex> lock(mu);
            if (anchors.empty()) anchors.emplace(spec.reference_point, 0.0);
            auto hit = anchors.find(x);
            if (hit != anchors.end()) return hit->second;

            auto up = anchors.upper_bound(x);
            double ax, ah;
            if (up == anchors.begin()) {
                ax = up->first;
                ah = up->second;
            } else if (up == anchors.end()) {
                const auto p = std::prev(up);
                ax = p->first;
                ah = p->second;
            } else {
                const auto lo_it = std::prev(up);
                if (x - lo_it->first <= up->first - x) {
                    ax = lo_it->first;
                    ah = lo_it->second;
                } else {
                    ax = up->first;
                    ah = up->second;
                }
            }

            const double lo = std::min(ax, x), hi = std::max(ax, x);
            std::vector<double> pts;
            ladder(lo, hi, pts);
            const int n = static_cast<int>(pts.size()) - 1;
            std::vector<double> hv(pts.size());
            if (ax == lo) {
                hv[0] = ah;
                for (int i = 0; i < n; ++i)
                    hv[i + 1] = hv[i] + integrate([this](double u) { return h_integrand(u); },
                                                  pts[i], pts[i + 1]);
            } else {
                hv[n] = ah;
                for (int i = n - 1; i >= 0; --i)
                    hv[i] = hv[i + 1] - integrate([this](double u) { return h_integrand(u); },
                                                  pts[i], pts[i + 1]);
            }
            for (std::size_t i = 0; i < pts.size(); ++i) insert_anchor(pts[i], hv[i]);
            return ax == lo ? hv[n] : hv[0];
        }

        void insert_anchor(double x, double v) const {
            if (anchors.size() >= 65536) {
                // Thin to every other entry; keep the reference point so the
                // H = 0 anchor can never drift.
                bool drop = false;
                for (auto it = anchors.begin(); it != anchors.end();) {
                    if (drop && it->first != spec.reference_point)
                        it = anchors.erase(it);
                    else
                        ++it;
                    drop = !drop;
                }
            }
            anchors.emplace(x, v);
        }

        double log_increment(double a, double b, bool speed) const {
            if (std::isnan(a) || std::isnan(b) || a > b)
                throw HullError("increment requires ordered finite points, got [" +
                                format_double(a) + ", " + format_double(b) + "]");
            if (a == b) return -kInf;
            if (!spec.interval.contains_interior(a) || !spec.interval.contains_interior(b))
                throw HullError("increment over [" + format_double(a) + ", " + format_double(b) +
                                "] leaves the open interval (" + format_double(spec.interval.alpha) +
                                ", " + format_double(spec.interval.beta) + ")");
            std::vector<double> pts;
            ladder(a, b, pts);
            double total = -kInf;
            for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
                const double l =
                    speed ? log_integrate([this](double u) { return log_m(u); }, pts[i], pts[i + 1])
                          : log_integrate([this](double u) { return -h(u); }, pts[i], pts[i + 1]);
                total = logaddexp(total, l);
            }
            return total;
        }
    };

    std::shared_ptr<Impl> impl_;
};

inline ScaleSpeed derive_scale_speed(const DiffusionSpec& spec) { return ScaleSpeed(spec); }

namespace detail {

// Tracks which parameters a family consumed so leftovers can be rejected by
// name instead of being silently ignored.
class ParamReader {
  public:
    ParamReader(std::string family, const std::map<std::string, double>& kv)
        : family_(std::move(family)), kv_(kv) {}

    double require(const char* key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError(family_ + ": missing parameter " + key);
        used_.insert(key);
        check_finite(key, it->second);
        return it->second;
    }

    double optional(const char* key, double def) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        used_.insert(key);
        check_finite(key, it->second);
        return it->second;
    }

    double require_positive(const char* key) {
        const double v = require(key);
        check_positive(key, v);
        return v;
    }

    double optional_positive(const char* key, double def) {
        const double v = optional(key, def);
        check_positive(key, v);
        return v;
    }

    void finish() const {
        for (const auto& [k, v] : kv_) {
            (void)v;
            if (!used_.count(k)) throw ConfigError(family_ + ": unknown parameter " + k);
        }
    }

  private:
    void check_finite(const char* key, double v) const {
        if (!std::isfinite(v))
            throw ConfigError(family_ + ": parameter " + std::string(key) + " must be finite, got " +
                              format_double(v));
    }
    void check_positive(const char* key, double v) const {
        if (!(v > 0.0))
            throw ConfigError(family_ + ": parameter " + std::string(key) +
                              " must be positive, got " + format_double(v));
    }

    std::string family_;
    std::map<std::string, double> kv_;
    std::set<std::string> used_;
};

} // namespace detail

// Canonical families with their natural intervals. Every family accepts an
// optional interior "x0" overriding the default reference point.
inline DiffusionSpec catalog(const std::string& name,
                             const std::map<std::string, double>& params = {}) {
    detail::ParamReader p(name, params);
    DiffusionSpec spec;
    spec.name = name;
    if (name == "brownian") {
        const double mu = p.optional("mu", 0.0);
        const double sigma = p.optional_positive("sigma", 1.0);
        spec.interval = IntervalSpec{-kInf, kInf, false, false};
        spec.reference_point = p.optional("x0", 0.0);
        spec.drift = [mu](double) { return mu; };
        spec.volatility = [sigma](double) { return sigma; };
    } else if (name == "gbm") {
        const double mu = p.require("mu");
        const double sigma = p.require_positive("sigma");
        spec.interval = IntervalSpec{0.0, kInf, false, false};
        spec.reference_point = p.optional("x0", 1.0);
        spec.drift = [mu](double x) { return mu * x; };
        spec.volatility = [sigma](double x) { return sigma * x; };
    } else if (name == "bessel") {
        const double delta = p.require_positive("delta");
        spec.interval = IntervalSpec{0.0, kInf, false, false};
        spec.reference_point = p.optional("x0", 1.0);
        spec.drift = [delta](double x) { return (delta - 1.0) / (2.0 * x); };
        spec.volatility = [](double) { return 1.0; };
    } else if (name == "cir") {
        const double kappa = p.require_positive("kappa");
        const double theta = p.require_positive("theta");
        const double sigma = p.require_positive("sigma");
        spec.interval = IntervalSpec{0.0, kInf, false, false};
        spec.reference_point = p.optional("x0", 1.0);
        spec.drift = [kappa, theta](double x) { return kappa * (theta - x); };
        spec.volatility = [sigma](double x) { return sigma * std::sqrt(x); };
    } else if (name == "ou") {
        const double kappa = p.require_positive("kappa");
        const double theta = p.optional("theta", 0.0);
        const double sigma = p.require_positive("sigma");
        spec.interval = IntervalSpec{-kInf, kInf, false, false};
        spec.reference_point = p.optional("x0", 0.0);
        spec.drift = [kappa, theta](double x) { return kappa * (theta - x); };
        spec.volatility = [sigma](double) { return sigma; };
    } else {
        throw ConfigError("unknown diffusion family '" + name +
                          "'; known families: brownian, gbm, bessel, cir, ou");
    }
    p.finish();
    spec.validate();
    return spec;
}

} // namespace diffmart
