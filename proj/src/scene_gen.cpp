#include "gsreg/scene_gen.hpp"

#include <cmath>
#include <stdexcept>

namespace gsreg {

ShapeKind parse_shape(const std::string& name) {
    if (name == "sphere") return ShapeKind::Sphere;
    if (name == "plane") return ShapeKind::Plane;
    if (name == "torus") return ShapeKind::Torus;
    throw std::domain_error("unknown shape '" + name + "' (expected sphere, plane or torus)");
}

std::string shape_name(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Sphere: return "sphere";
        case ShapeKind::Plane: return "plane";
        case ShapeKind::Torus: return "torus";
    }
    return "?";
}

AnalyticSurface AnalyticSurface::sphere(double radius) {
    if (!(radius > 0.0)) throw std::domain_error("sphere: radius must be > 0");
    AnalyticSurface s;
    s.kind_ = ShapeKind::Sphere;
    s.radius_ = radius;
    return s;
}

AnalyticSurface AnalyticSurface::plane(const Vec3& normal, double patch_half_extent) {
    if (normal.norm() < 1e-12) throw std::domain_error("plane: normal must be nonzero");
    if (!(patch_half_extent > 0.0)) throw std::domain_error("plane: patch extent must be > 0");
    AnalyticSurface s;
    s.kind_ = ShapeKind::Plane;
    s.normal_ = normal.normalized();
    s.patch_ = patch_half_extent;
    // Deterministic in-plane frame: cross with the axis least aligned with n.
    int least = 0;
    for (int d = 1; d < 3; ++d) {
        if (std::abs(s.normal_[d]) < std::abs(s.normal_[least])) least = d;
    }
    s.tangent_u_ = s.normal_.cross(Vec3::Unit(least)).normalized();
    s.tangent_v_ = s.normal_.cross(s.tangent_u_);
    return s;
}

AnalyticSurface AnalyticSurface::torus(double major_radius, double minor_radius) {
    if (!(major_radius > 0.0) || !(minor_radius > 0.0) || minor_radius >= major_radius) {
        throw std::domain_error("torus: need 0 < minor < major");
    }
    AnalyticSurface s;
    s.kind_ = ShapeKind::Torus;
    s.major_ = major_radius;
    s.radius_ = minor_radius;
    return s;
}

double AnalyticSurface::sdf(const Vec3& p) const {
    switch (kind_) {
        case ShapeKind::Sphere:
            return p.norm() - radius_;
        case ShapeKind::Plane:
            return normal_.dot(p);
        case ShapeKind::Torus: {
            const double ring = std::hypot(p.x(), p.y()) - major_;
            return std::hypot(ring, p.z()) - radius_;
        }
    }
    return 0.0;
}

Vec3 AnalyticSurface::sample(RandomEngine& rng) const {
    switch (kind_) {
        case ShapeKind::Sphere: {
            Vec3 dir = rng.normal3();
            while (dir.norm() < 1e-12) dir = rng.normal3();
            return radius_ * dir.normalized();
        }
        case ShapeKind::Plane: {
            const double u = rng.uniform(-patch_, patch_);
            const double v = rng.uniform(-patch_, patch_);
            return u * tangent_u_ + v * tangent_v_;
        }
        case ShapeKind::Torus: {
            // Rejection on the tube angle keeps the sampling area-uniform.
            const double theta = rng.uniform(0.0, 2.0 * M_PI);
            double phi;
            for (;;) {
                phi = rng.uniform(0.0, 2.0 * M_PI);
                const double accept = (major_ + radius_ * std::cos(phi)) / (major_ + radius_);
                if (rng.uniform() <= accept) break;
            }
            const double ring = major_ + radius_ * std::cos(phi);
            return Vec3{ring * std::cos(theta), ring * std::sin(theta), radius_ * std::sin(phi)};
        }
    }
    return Vec3::Zero();
}

void SceneSpec::validate() const {
    if (num_gaussians < 1) throw std::domain_error("SceneSpec: num_gaussians must be >= 1");
    if (num_targets < 1) throw std::domain_error("SceneSpec: num_targets must be >= 1");
    if (noise_sigma < 0.0) throw std::domain_error("SceneSpec: noise_sigma must be >= 0");
    if (!(gaussian_scale > 0.0)) throw std::domain_error("SceneSpec: gaussian_scale must be > 0");
    surface();  // shape parameter checks
}

AnalyticSurface SceneSpec::surface() const {
    switch (shape) {
        case ShapeKind::Sphere: return AnalyticSurface::sphere(radius);
        case ShapeKind::Plane: return AnalyticSurface::plane(plane_normal, plane_patch);
        case ShapeKind::Torus: return AnalyticSurface::torus(torus_major, torus_minor);
    }
    throw std::domain_error("SceneSpec: invalid shape");
}

GeneratedScene generate_scene(const SceneSpec& spec) {
    spec.validate();
    const AnalyticSurface surface = spec.surface();
    const Aabb bounds = Aabb::cube(1.0);
    RandomEngine rng(spec.seed);

    std::vector<Vec3> targets;
    targets.reserve(static_cast<std::size_t>(spec.num_targets));
    for (int i = 0; i < spec.num_targets; ++i) {
        targets.push_back(surface.sample(rng) + spec.noise_sigma * rng.normal3());
    }

    std::vector<Gaussian> gaussians;
    gaussians.reserve(static_cast<std::size_t>(spec.num_gaussians));
    for (int i = 0; i < spec.num_gaussians; ++i) {
        const Vec3& anchor = targets[rng.integer(targets.size())];
        Gaussian g;
        g.mean = bounds.clamp(anchor + 0.05 * rng.normal3());
        g.scales = spec.init_needles ? Vec3{spec.gaussian_scale * Vec3{1.0, 0.1, 0.1}}
                                     : Vec3{Vec3::Constant(spec.gaussian_scale)};
        g.rotation = rng.unit_quaternion();
        g.opacity = rng.uniform(0.2, 1.0);
        gaussians.push_back(g);
    }
    return GeneratedScene{GaussianScene::create(std::move(gaussians), bounds, spec.seed),
                          std::move(targets), surface};
}

}  // namespace gsreg
