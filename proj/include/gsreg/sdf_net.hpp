#pragma once

#include "gsreg/geometry.hpp"
#include "gsreg/rng.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <vector>

namespace gsreg {

/// Sinusoidal positional encoding configuration.
struct EncodingConfig {
    int num_bands = 6;
    bool include_raw = true;

    int encoded_dim() const { return (include_raw ? 3 : 0) + 6 * num_bands; }
};

/// Encodes x as [raw x (optional), then per band i: sin(2^i x_d) d=0..2,
/// cos(2^i x_d) d=0..2]. If jacobian is non-null it receives dE/dx.
Eigen::VectorXd positional_encode(const Vec3& x, const EncodingConfig& cfg,
                                  Eigen::Matrix<double, Eigen::Dynamic, 3>* jacobian = nullptr);

/// Similarity transform between scene coordinates and network coordinates:
/// u = (x - center) / radius, f(x) = radius * f_net(u). Uniform scaling keeps
/// gradient norms unchanged, so a distance field stays a distance field.
struct DomainMap {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

struct SdfEval {
    double value = 0.0;
    Vec3 gradient = Vec3::Zero();
};

struct LoadedNetwork;

/// MLP representing a signed distance field: positional encoding, softplus
/// hidden layers with one skip connection, scalar output. Forward, input
/// gradients and parameter gradients (including gradients of losses that
/// depend on the input gradient) are all hand-derived.
class SdfNetwork {
public:
    /// Zero-initialized network. skip_at = 0 disables the skip connection;
    /// otherwise it must lie in [1, hidden_layers - 1].
    SdfNetwork(const EncodingConfig& encoding, int hidden_layers, int width, int skip_at,
               double beta = 100.0);

    /// Sphere-like initialization: f(x) is approximately |x - center| - radius
    /// in network coordinates. Output bias is set to -radius.
    static SdfNetwork geometric(const EncodingConfig& encoding, int hidden_layers, int width,
                                int skip_at, double beta, double radius, RandomEngine& rng);

    /// Random weights with scale / sqrt(fan_in); used by small test networks.
    static SdfNetwork randomized(const EncodingConfig& encoding, int hidden_layers, int width,
                                 int skip_at, double beta, double scale, RandomEngine& rng);

    double forward(const Vec3& x) const;
    std::vector<double> forward(std::span<const Vec3> xs) const;

    SdfEval forward_with_input_gradient(const Vec3& x) const;

    /// Accumulates d(Phi)/d(theta) into grad for
    ///   Phi = d_value * f(x) + d_gradient . grad_x f(x).
    /// The gradient-dependent part runs forward-over-reverse. grad must have
    /// parameter_count() entries.
    void accumulate_param_gradients(const Vec3& x, double d_value, const Vec3& d_gradient,
                                    Eigen::VectorXd& grad) const;

    /// Batch convenience: parameter gradients of sum_i upstream_i * f(x_i).
    Eigen::VectorXd backward(std::span<const Vec3> xs, std::span<const double> upstream) const;

    int parameter_count() const { return param_count_; }
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);
    void add_to_parameters(const Eigen::VectorXd& delta);

    const EncodingConfig& encoding() const { return encoding_; }
    int hidden_layers() const { return static_cast<int>(hidden_.size()); }
    int width() const { return width_; }
    int skip_at() const { return skip_at_; }
    double beta() const { return beta_; }
    const DomainMap& domain() const { return domain_; }
    void set_domain(const DomainMap& map) { domain_ = map; }

    /// Binary checkpoint: JSON header followed by float32 little-endian
    /// parameter blocks in layer order.
    void save(const std::filesystem::path& path, const Aabb* bounds = nullptr) const;
    static LoadedNetwork load(const std::filesystem::path& path);

    /// Direct access for targeted tests (layer < hidden_layers selects a
    /// hidden layer, layer == hidden_layers the output layer).
    Eigen::MatrixXd& layer_weights(int layer);
    Eigen::VectorXd& layer_biases(int layer);

private:
    struct Layer {
        Eigen::MatrixXd weights;  // out x in
        Eigen::VectorXd biases;   // out
    };

    int layer_input_dim(int layer) const;
    // Parameters are validated once after each mutation, not per forward call.
    void ensure_finite() const;

    EncodingConfig encoding_;
    int width_ = 0;
    int skip_at_ = 0;
    double beta_ = 100.0;
    DomainMap domain_;
    std::vector<Layer> hidden_;
    Layer output_;
    std::vector<int> param_offsets_;  // flat offset of each layer's block
    int param_count_ = 0;
    mutable bool finite_checked_ = false;
};

/// Checkpoint payload: the network plus the scene bounds recorded alongside
/// it (when the writer provided them).
struct LoadedNetwork {
    SdfNetwork net;
    bool has_bounds = false;
    Aabb bounds;
};

}  // namespace gsreg
