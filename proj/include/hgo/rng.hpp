#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace hgo {

// Deterministic, platform-independent stream generator (splitmix64 core).
// std::random distributions are implementation-defined, so all sampling in
// this project goes through this class.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, Box-Muller (always consumes two uniforms)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // uniform in the closed Euclidean ball of given radius in dim dimensions
    std::vector<double> ball(int dim, double radius) {
        std::vector<double> v(static_cast<size_t>(dim));
        if (dim == 0) return v;
        if (dim == 1) {
            v[0] = uniform(-radius, radius);
            return v;
        }
        double norm2 = 0.0;
        for (auto& c : v) {
            c = normal();
            norm2 += c * c;
        }
        double norm = std::sqrt(norm2);
        if (norm < 1e-300) norm = 1e-300;
        double r = radius * std::pow(uniform(), 1.0 / dim);
        for (auto& c : v) c *= r / norm;
        return v;
    }

    // derive an independent stream for a sub-task; extending a budget keeps
    // the prefix of draws identical
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
        Rng r(seed ^ (0x632be59bd9b4e019ULL + index * 0x9e3779b97f4a7c15ULL));
        return r.next_u64();
    }

  private:
    std::uint64_t state_;
};

} // namespace hgo
