#include "gsreg/sdf_net.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace gsreg {
namespace {

using RowMajorMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Softplus with sharpness beta: phi(z) = log(1 + exp(beta z)) / beta.
// Above beta*z = 30 the function is numerically identical to z, so an exact
// linear branch keeps value, first and second derivative consistent.
struct Softplus {
    double beta;

    double value(double z) const {
        const double t = beta * z;
        if (t > 30.0) return z;
        return std::log1p(std::exp(t)) / beta;
    }
    double deriv(double z) const {
        const double t = beta * z;
        if (t > 30.0) return 1.0;
        return 1.0 / (1.0 + std::exp(-t));
    }
    double deriv2(double z) const {
        const double t = beta * z;
        if (t > 30.0) return 0.0;
        const double s = 1.0 / (1.0 + std::exp(-t));
        return beta * s * (1.0 - s);
    }
};

}  // namespace

Eigen::VectorXd positional_encode(const Vec3& x, const EncodingConfig& cfg,
                                  Eigen::Matrix<double, Eigen::Dynamic, 3>* jacobian) {
    if (cfg.num_bands < 1) {
        throw std::domain_error("positional_encode: num_bands must be >= 1");
    }
    const int dim = cfg.encoded_dim();
    Eigen::VectorXd out(dim);
    if (jacobian) {
        jacobian->setZero(dim, 3);
    }
    int row = 0;
    if (cfg.include_raw) {
        for (int d = 0; d < 3; ++d, ++row) {
            out[row] = x[d];
            if (jacobian) (*jacobian)(row, d) = 1.0;
        }
    }
    double freq = 1.0;
    for (int band = 0; band < cfg.num_bands; ++band, freq *= 2.0) {
        for (int d = 0; d < 3; ++d) {
            const double a = freq * x[d];
            out[row + d] = std::sin(a);
            out[row + 3 + d] = std::cos(a);
            if (jacobian) {
                (*jacobian)(row + d, d) = freq * std::cos(a);
                (*jacobian)(row + 3 + d, d) = -freq * std::sin(a);
            }
        }
        row += 6;
    }
    return out;
}

SdfNetwork::SdfNetwork(const EncodingConfig& encoding, int hidden_layers, int width, int skip_at,
                       double beta)
    : encoding_(encoding), width_(width), skip_at_(skip_at), beta_(beta) {
    if (hidden_layers < 1 || width < 1) {
        throw std::domain_error("SdfNetwork: hidden_layers and width must be >= 1");
    }
    if (skip_at != 0 && (skip_at < 1 || skip_at >= hidden_layers)) {
        throw std::domain_error("SdfNetwork: skip_at must be 0 or in [1, hidden_layers - 1]");
    }
    if (!(beta > 0.0)) {
        throw std::domain_error("SdfNetwork: beta must be > 0");
    }
    if (encoding.num_bands < 1) {
        throw std::domain_error("SdfNetwork: num_bands must be >= 1");
    }
    hidden_.resize(hidden_layers);
    for (int l = 0; l < hidden_layers; ++l) {
        hidden_[l].weights = Eigen::MatrixXd::Zero(width, layer_input_dim(l));
        hidden_[l].biases = Eigen::VectorXd::Zero(width);
    }
    output_.weights = Eigen::MatrixXd::Zero(1, width);
    output_.biases = Eigen::VectorXd::Zero(1);

    int offset = 0;
    for (const Layer& layer : hidden_) {
        param_offsets_.push_back(offset);
        offset += static_cast<int>(layer.weights.size() + layer.biases.size());
    }
    param_offsets_.push_back(offset);
    offset += static_cast<int>(output_.weights.size() + output_.biases.size());
    param_count_ = offset;
}

int SdfNetwork::layer_input_dim(int layer) const {
    const int encoded = encoding_.encoded_dim();
    if (layer == 0) return encoded;
    if (skip_at_ != 0 && layer == skip_at_) return width_ + encoded;
    return width_;
}

SdfNetwork SdfNetwork::geometric(const EncodingConfig& encoding, int hidden_layers, int width,
                                 int skip_at, double beta, double radius, RandomEngine& rng) {
    if (!(radius > 0.0)) {
        throw std::domain_error("SdfNetwork::geometric: radius must be > 0");
    }
    SdfNetwork net(encoding, hidden_layers, width, skip_at, beta);
    const int encoded = encoding.encoded_dim();
    const int raw = encoding.include_raw ? 3 : 0;

    for (int l = 0; l < hidden_layers; ++l) {
        Eigen::MatrixXd& w = net.hidden_[l].weights;
        const bool is_skip = net.skip_at_ != 0 && l == net.skip_at_;
        // N(0, 2/width) keeps |activations| tracking |x| layer to layer. The
        // skip layer sees the hidden state and the encoding concatenated,
        // which doubles the input norm, so its variance is halved.
        const double std_dev =
            std::sqrt((is_skip ? 1.0 : 2.0) / static_cast<double>(width));
        for (int r = 0; r < w.rows(); ++r) {
            for (int c = 0; c < w.cols(); ++c) {
                w(r, c) = std_dev * rng.normal();
            }
        }
        // Sinusoid channels start silent so the initial field is a function of
        // the raw coordinates alone, which is what makes it sphere-like.
        if (l == 0 || is_skip) {
            w.rightCols(encoded - raw).setZero();
        }
    }
    Eigen::MatrixXd& w_out = net.output_.weights;
    const double mean = std::sqrt(M_PI) / std::sqrt(static_cast<double>(width));
    for (int c = 0; c < w_out.cols(); ++c) {
        w_out(0, c) = mean + 1e-4 * rng.normal();
    }
    net.output_.biases[0] = 0.0;

    // The raw head tracks |x| only up to a realization-dependent gain and a
    // softplus floor (the activation rests at log(2)/beta, not 0, and the
    // quadratic softplus correction compounds through the depth). Probe the
    // head on a fixed direction set, fit f_raw ~ g|x| + c, and fold the fit
    // into the output layer so the initial field is |x| - radius.
    double sr = 0.0, srr = 0.0, sf = 0.0, srf = 0.0;
    int n_probe = 0;
    for (int d = 0; d < 16; ++d) {
        const double ga = M_PI * (3.0 - std::sqrt(5.0)) * d;      // Fibonacci sphere
        const double z = 1.0 - 2.0 * (d + 0.5) / 16.0;
        const double ring = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Vec3 dir{ring * std::cos(ga), ring * std::sin(ga), z};
        for (int s = 0; s <= 5; ++s) {
            const double r = 0.25 * s;
            const double f = net.forward(r * dir);
            sr += r;
            srr += r * r;
            sf += f;
            srf += r * f;
            ++n_probe;
        }
    }
    const double denom = n_probe * srr - sr * sr;
    double gain = (n_probe * srf - sr * sf) / denom;
    double offset = (sf - gain * sr) / n_probe;
    if (!(gain > 0.05 && gain < 20.0)) {
        gain = 1.0;
        offset = 0.0;
    }
    w_out /= gain;
    net.output_.biases[0] = -(radius + offset / gain);
    net.finite_checked_ = false;
    return net;
}

SdfNetwork SdfNetwork::randomized(const EncodingConfig& encoding, int hidden_layers, int width,
                                  int skip_at, double beta, double scale, RandomEngine& rng) {
    SdfNetwork net(encoding, hidden_layers, width, skip_at, beta);
    for (int l = 0; l <= hidden_layers; ++l) {
        Eigen::MatrixXd& w = net.layer_weights(l);
        Eigen::VectorXd& b = net.layer_biases(l);
        const double std_dev = scale / std::sqrt(static_cast<double>(w.cols()));
        for (int r = 0; r < w.rows(); ++r) {
            for (int c = 0; c < w.cols(); ++c) {
                w(r, c) = std_dev * rng.normal();
            }
        }
        for (int r = 0; r < b.size(); ++r) {
            b[r] = 0.1 * scale * rng.normal();
        }
    }
    return net;
}

Eigen::MatrixXd& SdfNetwork::layer_weights(int layer) {
    if (layer < 0 || layer > hidden_layers()) {
        throw std::out_of_range("SdfNetwork::layer_weights: bad layer index");
    }
    finite_checked_ = false;
    return layer == hidden_layers() ? output_.weights : hidden_[layer].weights;
}

Eigen::VectorXd& SdfNetwork::layer_biases(int layer) {
    if (layer < 0 || layer > hidden_layers()) {
        throw std::out_of_range("SdfNetwork::layer_biases: bad layer index");
    }
    finite_checked_ = false;
    return layer == hidden_layers() ? output_.biases : hidden_[layer].biases;
}

void SdfNetwork::ensure_finite() const {
    if (finite_checked_) return;
    auto check = [](const Layer& layer) {
        if (!layer.weights.allFinite() || !layer.biases.allFinite()) {
            throw std::runtime_error("SdfNetwork: non-finite parameter");
        }
    };
    for (const Layer& layer : hidden_) check(layer);
    check(output_);
    finite_checked_ = true;
}

double SdfNetwork::forward(const Vec3& x) const {
    ensure_finite();
    const Softplus act{beta_};
    const Vec3 u = (x - domain_.center) / domain_.radius;
    const Eigen::VectorXd encoded = positional_encode(u, encoding_);

    Eigen::VectorXd a = encoded;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        Eigen::VectorXd input;
        if (skip_at_ != 0 && static_cast<int>(l) == skip_at_) {
            input.resize(a.size() + encoded.size());
            input << a, encoded;
        } else {
            input = std::move(a);
        }
        Eigen::VectorXd z = hidden_[l].weights * input + hidden_[l].biases;
        a.resize(z.size());
        for (int i = 0; i < z.size(); ++i) a[i] = act.value(z[i]);
    }
    const double f_net = output_.weights.row(0).dot(a) + output_.biases[0];
    return domain_.radius * f_net;
}

std::vector<double> SdfNetwork::forward(std::span<const Vec3> xs) const {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const Vec3& x : xs) out.push_back(forward(x));
    return out;
}

SdfEval SdfNetwork::forward_with_input_gradient(const Vec3& x) const {
    ensure_finite();
    const Softplus act{beta_};
    const Vec3 u = (x - domain_.center) / domain_.radius;
    Eigen::Matrix<double, Eigen::Dynamic, 3> encoded_jac;
    const Eigen::VectorXd encoded = positional_encode(u, encoding_, &encoded_jac);

    Eigen::VectorXd a = encoded;
    Eigen::Matrix<double, Eigen::Dynamic, 3> tangent = encoded_jac;  // d a / d u
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        Eigen::VectorXd input;
        Eigen::Matrix<double, Eigen::Dynamic, 3> input_tangent;
        if (skip_at_ != 0 && static_cast<int>(l) == skip_at_) {
            input.resize(a.size() + encoded.size());
            input << a, encoded;
            input_tangent.resize(tangent.rows() + encoded_jac.rows(), 3);
            input_tangent << tangent, encoded_jac;
        } else {
            input = std::move(a);
            input_tangent = std::move(tangent);
        }
        Eigen::VectorXd z = hidden_[l].weights * input + hidden_[l].biases;
        Eigen::Matrix<double, Eigen::Dynamic, 3> zt = hidden_[l].weights * input_tangent;
        a.resize(z.size());
        tangent.resize(z.size(), 3);
        for (int i = 0; i < z.size(); ++i) {
            a[i] = act.value(z[i]);
            tangent.row(i) = act.deriv(z[i]) * zt.row(i);
        }
    }
    SdfEval eval;
    eval.value = domain_.radius * (output_.weights.row(0).dot(a) + output_.biases[0]);
    // f = radius * f_net((x - c)/radius), so d f / d x = d f_net / d u exactly.
    eval.gradient = (output_.weights.row(0) * tangent).transpose();
    return eval;
}

void SdfNetwork::accumulate_param_gradients(const Vec3& x, double d_value, const Vec3& d_gradient,
                                            Eigen::VectorXd& grad) const {
    if (grad.size() != param_count_) {
        throw std::invalid_argument("accumulate_param_gradients: gradient buffer size mismatch");
    }
    ensure_finite();
    const Softplus act{beta_};
    const bool with_tangent = d_gradient.squaredNorm() > 0.0;
    const int layers = hidden_layers();
    const Vec3 u = (x - domain_.center) / domain_.radius;

    Eigen::Matrix<double, Eigen::Dynamic, 3> encoded_jac;
    const Eigen::VectorXd encoded =
        positional_encode(u, encoding_, with_tangent ? &encoded_jac : nullptr);

    // Forward with caches. The tangent direction is d_gradient itself:
    // grad_x f . v equals the directional derivative of f_net along v in
    // network coordinates (the domain map's radius factors cancel).
    std::vector<Eigen::VectorXd> inputs(layers);       // input vector of each hidden layer
    std::vector<Eigen::VectorXd> zs(layers);           // pre-activations
    std::vector<Eigen::VectorXd> activations(layers);  // post-activations
    std::vector<Eigen::VectorXd> input_dots(layers);   // tangent of inputs
    std::vector<Eigen::VectorXd> z_dots(layers);       // tangent of pre-activations

    Eigen::VectorXd a = encoded;
    Eigen::VectorXd a_dot;
    if (with_tangent) a_dot = encoded_jac * d_gradient;

    for (int l = 0; l < layers; ++l) {
        if (skip_at_ != 0 && l == skip_at_) {
            inputs[l].resize(a.size() + encoded.size());
            inputs[l] << a, encoded;
            if (with_tangent) {
                input_dots[l].resize(a_dot.size() + encoded.size());
                input_dots[l] << a_dot, (encoded_jac * d_gradient);
            }
        } else {
            inputs[l] = a;
            if (with_tangent) input_dots[l] = a_dot;
        }
        zs[l] = hidden_[l].weights * inputs[l] + hidden_[l].biases;
        if (with_tangent) z_dots[l] = hidden_[l].weights * input_dots[l];
        a.resize(zs[l].size());
        if (with_tangent) a_dot.resize(zs[l].size());
        for (int i = 0; i < zs[l].size(); ++i) {
            a[i] = act.value(zs[l][i]);
            if (with_tangent) a_dot[i] = act.deriv(zs[l][i]) * z_dots[l][i];
        }
        activations[l] = a;
    }

    // Reverse pass for Phi = d_value * f + d_gradient . grad f. Two adjoint
    // streams: p_* for primal variables, r_* for tangent variables.
    const double value_seed = d_value * domain_.radius;  // f = radius * f_net

    auto weight_block = [&](int layer_index, int rows, int cols) {
        return RowMajorMap(grad.data() + param_offsets_[layer_index], rows, cols);
    };
    auto bias_block = [&](int layer_index, int rows, int cols) {
        return Eigen::Map<Eigen::VectorXd>(grad.data() + param_offsets_[layer_index] + rows * cols,
                                           rows);
    };

    const Eigen::VectorXd& last_a = activations[layers - 1];
    {
        auto gw = weight_block(layers, 1, width_);
        auto gb = bias_block(layers, 1, width_);
        gw.row(0) += value_seed * last_a.transpose();
        if (with_tangent) gw.row(0) += a_dot.transpose();
        gb[0] += value_seed;
    }

    Eigen::VectorXd p = value_seed * output_.weights.row(0).transpose();
    Eigen::VectorXd r;
    if (with_tangent) r = output_.weights.row(0).transpose();

    for (int l = layers - 1; l >= 0; --l) {
        const Eigen::VectorXd& z = zs[l];
        Eigen::VectorXd dz(z.size());
        Eigen::VectorXd dz_dot;
        if (with_tangent) dz_dot.resize(z.size());
        for (int i = 0; i < z.size(); ++i) {
            const double d1 = act.deriv(z[i]);
            dz[i] = d1 * p[i];
            if (with_tangent) {
                dz[i] += act.deriv2(z[i]) * z_dots[l][i] * r[i];
                dz_dot[i] = d1 * r[i];
            }
        }

        auto gw = weight_block(l, static_cast<int>(hidden_[l].weights.rows()),
                               static_cast<int>(hidden_[l].weights.cols()));
        auto gb = bias_block(l, static_cast<int>(hidden_[l].weights.rows()),
                             static_cast<int>(hidden_[l].weights.cols()));
        gw.noalias() += dz * inputs[l].transpose();
        if (with_tangent) gw.noalias() += dz_dot * input_dots[l].transpose();
        gb += dz;

        if (l == 0) break;
        Eigen::VectorXd d_input = hidden_[l].weights.transpose() * dz;
        Eigen::VectorXd d_input_dot;
        if (with_tangent) d_input_dot = hidden_[l].weights.transpose() * dz_dot;
        if (skip_at_ != 0 && l == skip_at_) {
            // Encoded half of the concat is parameter-free; drop its adjoint.
            p = d_input.head(width_);
            if (with_tangent) r = d_input_dot.head(width_);
        } else {
            p = std::move(d_input);
            if (with_tangent) r = std::move(d_input_dot);
        }
    }
}

Eigen::VectorXd SdfNetwork::backward(std::span<const Vec3> xs,
                                     std::span<const double> upstream) const {
    if (xs.size() != upstream.size()) {
        throw std::invalid_argument("backward: inputs and upstream scalars differ in length");
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(param_count_);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        accumulate_param_gradients(xs[i], upstream[i], Vec3::Zero(), grad);
    }
    return grad;
}

Eigen::VectorXd SdfNetwork::parameters() const {
    Eigen::VectorXd flat(param_count_);
    int offset = 0;
    auto emit = [&](const Layer& layer) {
        RowMajorMap(flat.data() + offset, layer.weights.rows(), layer.weights.cols()) =
            layer.weights;
        offset += static_cast<int>(layer.weights.size());
        flat.segment(offset, layer.biases.size()) = layer.biases;
        offset += static_cast<int>(layer.biases.size());
    };
    for (const Layer& layer : hidden_) emit(layer);
    emit(output_);
    return flat;
}

void SdfNetwork::set_parameters(const Eigen::VectorXd& flat) {
    if (flat.size() != param_count_) {
        throw std::invalid_argument("set_parameters: size mismatch");
    }
    int offset = 0;
    auto take = [&](Layer& layer) {
        layer.weights =
            ConstRowMajorMap(flat.data() + offset, layer.weights.rows(), layer.weights.cols());
        offset += static_cast<int>(layer.weights.size());
        layer.biases = flat.segment(offset, layer.biases.size());
        offset += static_cast<int>(layer.biases.size());
    };
    for (Layer& layer : hidden_) take(layer);
    take(output_);
    finite_checked_ = false;
}

void SdfNetwork::add_to_parameters(const Eigen::VectorXd& delta) {
    if (delta.size() != param_count_) {
        throw std::invalid_argument("add_to_parameters: size mismatch");
    }
    Eigen::VectorXd flat = parameters();
    flat += delta;
    set_parameters(flat);
}

void SdfNetwork::save(const std::filesystem::path& path, const Aabb* bounds) const {
    nlohmann::json header;
    header["format"] = "gsreg-sdfnet";
    header["version"] = 1;
    header["num_bands"] = encoding_.num_bands;
    header["include_raw"] = encoding_.include_raw;
    header["hidden_layers"] = hidden_layers();
    header["width"] = width_;
    header["skip_at"] = skip_at_;
    header["beta"] = beta_;
    header["domain"] = {{"center", {domain_.center.x(), domain_.center.y(), domain_.center.z()}},
                        {"radius", domain_.radius}};
    if (bounds) {
        header["bounds"] = {{"min", {bounds->min.x(), bounds->min.y(), bounds->min.z()}},
                            {"max", {bounds->max.x(), bounds->max.y(), bounds->max.z()}}};
    }
    header["param_count"] = param_count_;
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("SdfNetwork::save: cannot open " + path.string());
    }
    out.write("GSDF", 4);
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));

    const Eigen::VectorXd flat = parameters();
    std::vector<float> block(static_cast<std::size_t>(flat.size()));
    for (int i = 0; i < flat.size(); ++i) block[static_cast<std::size_t>(i)] =
        static_cast<float>(flat[i]);
    out.write(reinterpret_cast<const char*>(block.data()),
              static_cast<std::streamsize>(block.size() * sizeof(float)));
    if (!out) {
        throw std::runtime_error("SdfNetwork::save: write failed for " + path.string());
    }
}

LoadedNetwork SdfNetwork::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("SdfNetwork::load: cannot open " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "GSDF", 4) != 0) {
        throw std::runtime_error("SdfNetwork::load: bad magic in " + path.string());
    }
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len == 0 || len > (1u << 20)) {
        throw std::runtime_error("SdfNetwork::load: corrupt header length");
    }
    std::string text(len, '\0');
    in.read(text.data(), len);
    if (!in) {
        throw std::runtime_error("SdfNetwork::load: truncated header");
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("SdfNetwork::load: header is not JSON: ") + e.what());
    }
    EncodingConfig enc;
    SdfNetwork net = [&] {
        try {
            enc.num_bands = header.at("num_bands").get<int>();
            enc.include_raw = header.at("include_raw").get<bool>();
            return SdfNetwork(enc, header.at("hidden_layers").get<int>(),
                              header.at("width").get<int>(), header.at("skip_at").get<int>(),
                              header.at("beta").get<double>());
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(std::string("SdfNetwork::load: bad header field: ") +
                                     e.what());
        }
    }();
    if (header.contains("domain")) {
        const auto& dom = header["domain"];
        DomainMap map;
        map.center = Vec3{dom.at("center")[0].get<double>(), dom.at("center")[1].get<double>(),
                          dom.at("center")[2].get<double>()};
        map.radius = dom.at("radius").get<double>();
        if (!(map.radius > 0.0) || !map.center.allFinite()) {
            throw std::runtime_error("SdfNetwork::load: invalid domain map");
        }
        net.set_domain(map);
    }
    const int declared = header.value("param_count", net.parameter_count());
    if (declared != net.parameter_count()) {
        throw std::runtime_error("SdfNetwork::load: parameter count mismatch");
    }

    std::vector<float> block(static_cast<std::size_t>(net.parameter_count()));
    in.read(reinterpret_cast<char*>(block.data()),
            static_cast<std::streamsize>(block.size() * sizeof(float)));
    if (!in) {
        throw std::runtime_error("SdfNetwork::load: truncated parameter block");
    }
    Eigen::VectorXd flat(net.parameter_count());
    for (int i = 0; i < flat.size(); ++i) flat[i] = block[static_cast<std::size_t>(i)];
    if (!flat.allFinite()) {
        throw std::runtime_error("SdfNetwork::load: non-finite parameters");
    }
    net.set_parameters(flat);

    LoadedNetwork result{std::move(net), false, Aabb{}};
    if (header.contains("bounds")) {
        const auto& b = header["bounds"];
        result.bounds.min = Vec3{b.at("min")[0].get<double>(), b.at("min")[1].get<double>(),
                                 b.at("min")[2].get<double>()};
        result.bounds.max = Vec3{b.at("max")[0].get<double>(), b.at("max")[1].get<double>(),
                                 b.at("max")[2].get<double>()};
        result.has_bounds = true;
    }
    return result;
}

}  // namespace gsreg
