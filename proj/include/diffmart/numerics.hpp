#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace diffmart {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kLn2 = 0.6931471805599453094;

// log(e^a + e^b) without overflow. -inf operands encode zero mass.
inline double logaddexp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    double hi = a > b ? a : b;
    double lo = a > b ? b : a;
    return hi + std::log1p(std::exp(lo - hi));
}

// log sum_i e^{a[i]}, max-shifted for accuracy over small arrays.
inline double logsumexp(const double* a, int n) {
    double m = -kInf;
    for (int i = 0; i < n; ++i)
        if (a[i] > m) m = a[i];
    if (m == -kInf || std::isinf(m)) return m;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(a[i] - m);
    return m + std::log(s);
}

// Fixed-order pairwise summation: deterministic regardless of how the data
// was produced, with O(log n) rounding-error growth.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), v.size());
}

inline double sq(double x) { return x * x; }

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace diffmart
