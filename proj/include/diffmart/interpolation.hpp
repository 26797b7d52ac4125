#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "diffmart/errors.hpp"
#include "diffmart/numerics.hpp"

namespace diffmart {

// Shape-preserving piecewise-cubic interpolation (Fritsch-Carlson slope
// limiting): monotone data produce a monotone interpolant, and node values
// are reproduced exactly.
class Pchip {
  public:
    Pchip() = default;

    Pchip(std::vector<double> xs, std::vector<double> ys)
        : xs_(std::move(xs)), ys_(std::move(ys)) {
        const std::size_t n = xs_.size();
        if (n < 2 || ys_.size() != n)
            throw SolverError("pchip: need at least two nodes and matching arrays");
        for (std::size_t i = 0; i + 1 < n; ++i)
            if (!(xs_[i] < xs_[i + 1]))
                throw SolverError("pchip: abscissae not strictly increasing near index " +
                                  std::to_string(i));
        ds_.resize(n);
        if (n == 2) {
            double d = (ys_[1] - ys_[0]) / (xs_[1] - xs_[0]);
            ds_[0] = ds_[1] = d;
            return;
        }
        std::vector<double> h(n - 1), delta(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = xs_[i + 1] - xs_[i];
            delta[i] = (ys_[i + 1] - ys_[i]) / h[i];
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (delta[i - 1] == 0.0 || delta[i] == 0.0 ||
                (delta[i - 1] > 0) != (delta[i] > 0)) {
                ds_[i] = 0.0;
            } else {
                const double w1 = 2.0 * h[i] + h[i - 1];
                const double w2 = h[i] + 2.0 * h[i - 1];
                ds_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        ds_[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
        ds_[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }

    double operator()(double x) const {
        const std::size_t i = locate(x);
        const double h = xs_[i + 1] - xs_[i];
        const double w = (x - xs_[i]) / h;
        const double w2 = w * w, w3 = w2 * w;
        const double h00 = 2 * w3 - 3 * w2 + 1;
        const double h10 = w3 - 2 * w2 + w;
        const double h01 = -2 * w3 + 3 * w2;
        const double h11 = w3 - w2;
        return h00 * ys_[i] + h * h10 * ds_[i] + h01 * ys_[i + 1] + h * h11 * ds_[i + 1];
    }

    double min_x() const { return xs_.front(); }
    double max_x() const { return xs_.back(); }

  private:
    static double edge_slope(double h0, double h1, double d0, double d1) {
        // Three-point one-sided estimate, clamped to preserve shape.
        double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (d0 == 0.0) return 0.0;
        if ((d > 0) != (d0 > 0)) return 0.0;
        if ((d0 > 0) != (d1 > 0) && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
        return d;
    }

    std::size_t locate(double x) const {
        if (std::isnan(x) || x < xs_.front() || x > xs_.back())
            throw HullError("evaluation point " + format_double(x) +
                            " outside interpolation hull [" + format_double(xs_.front()) +
                            ", " + format_double(xs_.back()) + "]");
        // upper_bound - 1 gives the cell; right endpoint maps to last cell.
        auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        std::size_t i = (std::size_t)(it - xs_.begin());
        if (i > 0) --i;
        if (i + 1 >= xs_.size()) i = xs_.size() - 2;
        return i;
    }

    std::vector<double> xs_, ys_, ds_;
};

} // namespace diffmart
