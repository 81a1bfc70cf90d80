#pragma once

#include "gsreg/gaussian.hpp"

#include <string>
#include <vector>

namespace gsreg {

enum class ShapeKind { Sphere, Plane, Torus };

ShapeKind parse_shape(const std::string& name);  // throws std::domain_error
std::string shape_name(ShapeKind kind);

/// Analytic zero-level-set references used in place of captured scenes:
/// sphere (closed), plane patch (open), torus (genus 1).
class AnalyticSurface {
public:
    static AnalyticSurface sphere(double radius);
    /// Plane through the origin. Surface samples come from a square patch of
    /// the given half extent so the "surface" stays inside the scene bounds.
    static AnalyticSurface plane(const Vec3& normal, double patch_half_extent = 0.8);
    static AnalyticSurface torus(double major_radius, double minor_radius);

    double sdf(const Vec3& p) const;
    /// Uniform (area-weighted) point on the surface.
    Vec3 sample(RandomEngine& rng) const;

    ShapeKind kind() const { return kind_; }

private:
    AnalyticSurface() = default;

    ShapeKind kind_ = ShapeKind::Sphere;
    double radius_ = 0.5;        // sphere radius / torus minor radius
    double major_ = 0.35;        // torus major radius
    Vec3 normal_ = Vec3::UnitZ();
    Vec3 tangent_u_ = Vec3::UnitX();
    Vec3 tangent_v_ = Vec3::UnitY();
    double patch_ = 0.8;
};

struct SceneSpec {
    ShapeKind shape = ShapeKind::Sphere;
    double radius = 0.5;        // sphere
    double torus_major = 0.35;
    double torus_minor = 0.15;
    Vec3 plane_normal = Vec3::UnitZ();
    double plane_patch = 0.8;
    int num_gaussians = 150;
    int num_targets = 1000;
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;
    bool init_needles = false;   // scale ratios (1, 0.1, 0.1) instead of isotropic
    double gaussian_scale = 0.05;

    void validate() const;
    AnalyticSurface surface() const;
};

struct GeneratedScene {
    GaussianScene scene;
    std::vector<Vec3> targets;
    AnalyticSurface surface;
};

/// Targets are surface samples with isotropic Gaussian noise; initial
/// Gaussians sit at perturbed targets with random orientation. Scene bounds
/// are the fixed cube [-1, 1]^3.
GeneratedScene generate_scene(const SceneSpec& spec);

}  // namespace gsreg
