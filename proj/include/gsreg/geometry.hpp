#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cstdint>

namespace gsreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Axis-aligned box in scene units.
struct Aabb {
    Vec3 min{-1.0, -1.0, -1.0};
    Vec3 max{1.0, 1.0, 1.0};

    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 half_extents() const { return 0.5 * (max - min); }

    /// Radius of the bounding sphere around the box center.
    double bounding_radius() const { return half_extents().norm(); }

    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }

    Vec3 clamp(const Vec3& p) const {
        return p.array().max(min.array()).min(max.array()).matrix();
    }

    Vec3 extent() const { return max - min; }

    static Aabb cube(double half_side) {
        return Aabb{Vec3::Constant(-half_side), Vec3::Constant(half_side)};
    }
};

}  // namespace gsreg
