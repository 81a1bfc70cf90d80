#pragma once

#include "gsreg/geometry.hpp"
#include "gsreg/rng.hpp"

#include <cstdint>
#include <vector>

namespace gsreg {

/// One anisotropic 3D Gaussian primitive.
struct Gaussian {
    Vec3 mean = Vec3::Zero();
    Vec3 scales = Vec3::Ones();   // per-axis scale factors, all > 0
    Quat rotation = Quat::Identity();
    double opacity = 1.0;         // carried for serialization, unused by the losses

    /// Throws std::domain_error if an invariant is violated.
    void validate() const;
};

/// Ordered collection of Gaussians plus scene bounds and the run seed.
struct GaussianScene {
    std::vector<Gaussian> gaussians;
    Aabb bounds;
    std::uint64_t seed = 0;

    std::size_t size() const { return gaussians.size(); }
    bool empty() const { return gaussians.empty(); }

    /// Validating constructor: every Gaussian must satisfy its invariants and
    /// every mean must lie inside bounds.
    static GaussianScene create(std::vector<Gaussian> gaussians, const Aabb& bounds,
                                std::uint64_t seed);
};

/// Intermediate quantities of the effective-rank computation.
struct ErankTerms {
    Vec3 q = Vec3::Zero();  // normalized squared scales, sums to 1
    double entropy = 0.0;   // Shannon entropy of q, nats
    double erank = 0.0;     // exp(entropy), in [1, 3]
};

/// Floor applied to q before the log so that 0*log(0) evaluates to its limit.
inline constexpr double kEntropyClamp = 1e-12;

/// q_i = s_i^2 / sum_j s_j^2. Throws std::domain_error on non-positive or
/// non-finite scales.
Vec3 normalized_squared_scales(const Vec3& scales);

ErankTerms effective_rank(const Vec3& scales);

/// Per-Gaussian shape penalty: max(-log(erank - 1 + epsilon), 0) + smallest
/// scale. The log term vanishes once erank >= 2 - epsilon.
double erank_penalty(const Gaussian& g, double epsilon = 1e-8);

/// Same penalty with the analytic derivative with respect to the three raw
/// scales. The smallest-scale subgradient goes to the lowest index on ties.
double erank_penalty_with_grad(const Vec3& scales, double epsilon, Vec3& d_scales);

struct ErankLossResult {
    double value = 0.0;
    std::vector<Vec3> d_scales;  // one 3-vector per Gaussian
};

/// Mean of erank_penalty over the scene. Throws std::domain_error on an empty
/// scene. The reduction runs in index order so results are reproducible.
ErankLossResult erank_loss(const GaussianScene& scene, double epsilon = 1e-8);

double mean_erank(const GaussianScene& scene);

/// Sigma = R diag(s^2) R^T.
Mat3 covariance(const Gaussian& g);

/// Draws from N(mean, Sigma) via x = mean + R diag(s) z, z ~ N(0, I).
std::vector<Vec3> sample_from_gaussian(const Gaussian& g, int count, RandomEngine& rng);

}  // namespace gsreg
