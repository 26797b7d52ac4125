#pragma once

#include <cmath>
#include <cstdint>

namespace diffmart {

// splitmix64 finalizer (Stafford mix13 constants).
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

// Counter-based per-path stream: the state sequence depends only on
// (seed, path_index), never on how many draws other paths made, so results
// are bit-identical under any batching or execution order.
class PathStream {
  public:
    PathStream(std::uint64_t seed, std::uint64_t path_index)
        : state_(mix64(seed + 0x9E3779B97F4A7C15ULL * (path_index + 1))) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    // Uniform on (0, 1]: never 0, so logs are safe.
    double uniform() {
        return ((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Box-Muller pair from two uniforms.
    void normal_pair(double& z1, double& z2) {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * 3.14159265358979323846 * u2;
        z1 = r * std::cos(t);
        z2 = r * std::sin(t);
    }

  private:
    std::uint64_t state_;
};

} // namespace diffmart
