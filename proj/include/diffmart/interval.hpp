#pragma once

#include <cmath>
#include <string>

#include "diffmart/errors.hpp"
#include "diffmart/numerics.hpp"

namespace diffmart {

enum class Side { alpha, beta };

inline const char* side_name(Side s) { return s == Side::alpha ? "alpha" : "beta"; }

// State interval with extended-real endpoints. Inclusion flags are recorded
// and validated; an infinite endpoint is never included.
struct IntervalSpec {
    double alpha = -kInf;
    double beta = kInf;
    bool alpha_included = false;
    bool beta_included = false;

    void validate() const {
        if (std::isnan(alpha) || std::isnan(beta))
            throw ConfigError("interval: endpoint is NaN");
        if (!(alpha < beta))
            throw ConfigError("interval: requires alpha < beta, got [" +
                              format_double(alpha) + ", " + format_double(beta) + "]");
        if (std::isinf(alpha) && alpha_included)
            throw ConfigError("interval: infinite endpoint alpha cannot be included");
        if (std::isinf(beta) && beta_included)
            throw ConfigError("interval: infinite endpoint beta cannot be included");
    }

    bool contains_interior(double x) const { return x > alpha && x < beta; }

    double endpoint(Side s) const { return s == Side::alpha ? alpha : beta; }
};

// Monotone map of (alpha, beta) onto the unit interval, used to place
// truncation sequences and grid nodes. Geometric approach to an endpoint in
// the unit coordinate gives polynomial approach for a finite endpoint and
// exponential-in-x escape for an infinite one. The gap parametrization below
// is cancellation-free: the distance to an endpoint is never formed as 1 - c.
class Compactifier {
  public:
    explicit Compactifier(const IntervalSpec& iv) : a_(iv.alpha), b_(iv.beta) {
        bool ia = std::isinf(iv.alpha), ib = std::isinf(iv.beta);
        kind_ = ia ? (ib ? Kind::both_infinite : Kind::right_finite)
                   : (ib ? Kind::left_finite : Kind::finite);
    }

    // Unit-coordinate distance from x to the endpoint on the given side.
    double gap(double x, Side side) const {
        switch (kind_) {
            case Kind::finite:
                return side == Side::beta ? (b_ - x) / (b_ - a_) : (x - a_) / (b_ - a_);
            case Kind::left_finite: {
                double u = x - a_; // in (0, inf)
                return side == Side::beta ? 1.0 / (1.0 + u) : u / (1.0 + u);
            }
            case Kind::right_finite: {
                double u = b_ - x;
                return side == Side::alpha ? 1.0 / (1.0 + u) : u / (1.0 + u);
            }
            case Kind::both_infinite:
                if (side == Side::beta)
                    return x > 0 ? std::atan(1.0 / x) / kPi : 0.5 + std::atan(-x) / kPi;
                return x < 0 ? std::atan(-1.0 / x) / kPi : 0.5 + std::atan(x) / kPi;
        }
        return kNaN;
    }

    // Inverse of gap: the state point at unit-distance g from the endpoint.
    double x_at_gap(double g, Side side) const {
        switch (kind_) {
            case Kind::finite:
                return side == Side::beta ? b_ - g * (b_ - a_) : a_ + g * (b_ - a_);
            case Kind::left_finite:
                return side == Side::beta ? a_ + (1.0 - g) / g : a_ + g / (1.0 - g);
            case Kind::right_finite:
                return side == Side::alpha ? b_ - (1.0 - g) / g : b_ - g / (1.0 - g);
            case Kind::both_infinite:
                // cot(pi g) is monotone decreasing from +inf to -inf on (0,1);
                // near g = 0.5 the 1/tan form degrades gracefully to ~0.
                return side == Side::beta ? 1.0 / std::tan(kPi * g)
                                          : -1.0 / std::tan(kPi * g);
        }
        return kNaN;
    }

  private:
    enum class Kind { finite, left_finite, right_finite, both_infinite };
    static constexpr double kPi = 3.14159265358979323846;
    Kind kind_;
    double a_, b_;
};

} // namespace diffmart
