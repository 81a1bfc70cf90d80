#pragma once

#include "gsreg/geometry.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace gsreg {

/// Deterministic random source. All distribution transforms are implemented
/// here rather than with std::*_distribution, whose output is
/// implementation-defined; a fixed seed therefore yields the same stream on
/// every standard library.
class RandomEngine {
public:
    explicit RandomEngine(std::uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller. The spare value is cached, so draws
    /// come in pairs of two uniforms.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Guard against log(0).
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    Vec3 normal3() {
        const double x = normal();
        const double y = normal();
        const double z = normal();
        return Vec3{x, y, z};
    }

    /// Uniform integer in [0, n). Lemire's multiply-shift; n must be > 0.
    std::uint64_t integer(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<__uint128_t>(gen_()) * static_cast<__uint128_t>(n)) >> 64);
    }

    /// Uniformly distributed unit quaternion.
    Quat unit_quaternion() {
        Eigen::Vector4d v{normal(), normal(), normal(), normal()};
        while (v.norm() < 1e-12) v = Eigen::Vector4d{normal(), normal(), normal(), normal()};
        v.normalize();
        return Quat{v[0], v[1], v[2], v[3]};  // (w, x, y, z)
    }

    Vec3 point_in_box(const Aabb& box) {
        return Vec3{uniform(box.min.x(), box.max.x()), uniform(box.min.y(), box.max.y()),
                    uniform(box.min.z(), box.max.z())};
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gsreg
