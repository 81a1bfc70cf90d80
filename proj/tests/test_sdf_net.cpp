#include "gsreg/sdf_net.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace gsreg;

namespace {

SdfNetwork tiny_random_net(std::uint64_t seed, int layers = 2, int width = 16, int skip = 0,
                           double beta = 100.0) {
    EncodingConfig enc;
    enc.num_bands = 3;
    RandomEngine rng(seed);
    return SdfNetwork::randomized(enc, layers, width, skip, beta, 1.0, rng);
}

/// Exact linear field w.x + c built from one softplus layer pinned into its
/// linear branch by a large bias.
SdfNetwork linear_net(const Vec3& w, double c) {
    EncodingConfig enc;
    enc.num_bands = 1;
    SdfNetwork net(enc, 1, 1, 0, 100.0);
    const double shift = 1000.0;
    Eigen::MatrixXd& w0 = net.layer_weights(0);
    w0.setZero();
    w0(0, 0) = w.x();
    w0(0, 1) = w.y();
    w0(0, 2) = w.z();
    net.layer_biases(0)[0] = shift;
    net.layer_weights(1)(0, 0) = 1.0;
    net.layer_biases(1)[0] = c - shift;
    return net;
}

}  // namespace

TEST_CASE("positional encoding layout and values") {
    EncodingConfig cfg;  // 6 bands, raw included
    const Eigen::VectorXd zero = positional_encode(Vec3::Zero(), cfg);
    REQUIRE(zero.size() == 39);
    CHECK(zero.head<3>().norm() == 0.0);
    for (int band = 0; band < 6; ++band) {
        const int base = 3 + 6 * band;
        for (int d = 0; d < 3; ++d) {
            CHECK(zero[base + d] == 0.0);        // sines
            CHECK(zero[base + 3 + d] == 1.0);    // cosines
        }
    }

    const Eigen::VectorXd at_pi = positional_encode(Vec3{M_PI, 0, 0}, cfg);
    CHECK(std::abs(at_pi[3]) < 1e-12);        // sin(pi)
    CHECK(at_pi[6] == doctest::Approx(-1.0)); // cos(pi)

    EncodingConfig no_raw;
    no_raw.include_raw = false;
    no_raw.num_bands = 4;
    CHECK(positional_encode(Vec3::Zero(), no_raw).size() == 24);

    // Band-0 components are 2*pi periodic in each coordinate.
    RandomEngine rng(3);
    for (int i = 0; i < 20; ++i) {
        const Vec3 x = rng.normal3();
        for (int d = 0; d < 3; ++d) {
            const Eigen::VectorXd a = positional_encode(x, cfg);
            const Eigen::VectorXd b = positional_encode(x + 2.0 * M_PI * Vec3::Unit(d), cfg);
            CHECK(std::abs(a[3 + d] - b[3 + d]) < 1e-9);
            CHECK(std::abs(a[6 + d] - b[6 + d]) < 1e-9);
        }
    }
}

TEST_CASE("positional encoding jacobian vs finite differences") {
    EncodingConfig cfg;
    RandomEngine rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        Vec3 x = rng.normal3();
        Eigen::Matrix<double, Eigen::Dynamic, 3> jac;
        positional_encode(x, cfg, &jac);
        const double h = 1e-6;
        for (int d = 0; d < 3; ++d) {
            const double saved = x[d];
            x[d] = saved + h;
            const Eigen::VectorXd up = positional_encode(x, cfg);
            x[d] = saved - h;
            const Eigen::VectorXd down = positional_encode(x, cfg);
            x[d] = saved;
            const Eigen::VectorXd fd = (up - down) / (2 * h);
            CHECK((jac.col(d) - fd).cwiseAbs().maxCoeff() < 1e-5);
        }
    }
}

TEST_CASE("softplus branch is monotone and accurate") {
    const double beta = 100.0;
    SdfNetwork net(EncodingConfig{}, 1, 1, 0, beta);
    // Probe the activation through a 1-unit network: f = softplus(z) with
    // weight picking z = x1.
    net.layer_weights(0)(0, 0) = 1.0;
    net.layer_weights(1)(0, 0) = 1.0;

    double previous = -1.0;
    for (double t = -30.0; t <= 30.0; t += 0.25) {
        const double z = t / beta;
        const double got = net.forward(Vec3{z, 0, 0});
        const long double exact = std::log1p(std::exp((long double)(beta * z))) / beta;
        CHECK(std::abs(got - (double)exact) < 1e-6);
        CHECK(got >= previous);
        previous = got;
    }
    // Linear branch continues smoothly past the cutover.
    CHECK(net.forward(Vec3{1.0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("forward: constant and linear networks") {
    SdfNetwork zero_net(EncodingConfig{}, 3, 8, 2, 100.0);
    zero_net.layer_biases(3)[0] = 0.75;  // output bias
    RandomEngine rng(5);
    for (int i = 0; i < 10; ++i) {
        const Vec3 x = rng.normal3();
        CHECK(zero_net.forward(x) == doctest::Approx(0.75).epsilon(1e-12));
        const SdfEval eval = zero_net.forward_with_input_gradient(x);
        CHECK(eval.gradient.norm() == 0.0);
    }

    const Vec3 w{0.3, -1.2, 0.4};
    SdfNetwork lin = linear_net(w, 0.1);
    for (int i = 0; i < 10; ++i) {
        const Vec3 x = 0.3 * rng.normal3();
        CHECK(lin.forward(x) == doctest::Approx(w.dot(x) + 0.1).epsilon(1e-12));
        const SdfEval eval = lin.forward_with_input_gradient(x);
        CHECK((eval.gradient - w).norm() < 1e-12);
    }

    // Batched forward is exactly the per-point forward.
    std::vector<Vec3> xs;
    for (int i = 0; i < 32; ++i) xs.push_back(rng.normal3());
    const std::vector<double> batched = lin.forward(xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK(batched[i] == lin.forward(xs[i]));
    }

    SdfNetwork poisoned = tiny_random_net(1);
    poisoned.layer_weights(0)(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(poisoned.forward(Vec3::Zero()), std::runtime_error);
}

TEST_CASE("input gradients vs finite differences on random networks") {
    RandomEngine point_rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const int layers = 2 + trial % 2;
        const int skip = (layers == 3 && trial % 4 == 1) ? 1 : 0;
        const double beta = trial % 2 == 0 ? 100.0 : 10.0;
        const SdfNetwork net = tiny_random_net(900 + static_cast<std::uint64_t>(trial), layers,
                                               16, skip, beta);
        Vec3 x = point_rng.point_in_box(Aabb::cube(1.0));
        const SdfEval eval = net.forward_with_input_gradient(x);
        CHECK(eval.value == doctest::Approx(net.forward(x)).epsilon(1e-12));

        Eigen::VectorXd fd(3);
        const double h = 1e-4;
        for (int d = 0; d < 3; ++d) {
            const double saved = x[d];
            x[d] = saved + h;
            const double up = net.forward(x);
            x[d] = saved - h;
            const double down = net.forward(x);
            x[d] = saved;
            fd[d] = (up - down) / (2 * h);
        }
        CHECK(gsreg::testing::gradient_rel_error(eval.gradient, fd) <= 1e-3);
    }
}

TEST_CASE("parameter gradients: zero upstream and f^2 objective") {
    SdfNetwork net = tiny_random_net(31, 3, 16, 1);
    RandomEngine rng(77);
    const Vec3 x = rng.point_in_box(Aabb::cube(1.0));

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.parameter_count());
    net.accumulate_param_gradients(x, 0.0, Vec3::Zero(), grad);
    CHECK(grad.norm() == 0.0);

    // d(f^2)/d(output bias) = 2 f; the output bias is the last flat entry.
    net.accumulate_param_gradients(x, 2.0 * net.forward(x), Vec3::Zero(), grad);
    const double f = net.forward(x);
    CHECK(grad[net.parameter_count() - 1] ==
          doctest::Approx(2.0 * f * net.domain().radius).epsilon(1e-9));

    Eigen::VectorXd params = net.parameters();
    Eigen::VectorXd fd(net.parameter_count());
    const double h = 1e-5;
    for (int i = 0; i < net.parameter_count(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        net.set_parameters(params);
        const double up = net.forward(x);
        params[i] = saved - h;
        net.set_parameters(params);
        const double down = net.forward(x);
        params[i] = saved;
        net.set_parameters(params);
        fd[i] = (up * up - down * down) / (2 * h);
    }
    CHECK(gsreg::testing::gradient_rel_error(grad, fd) <= 1e-3);
}

TEST_CASE("second-order path: eikonal objective parameter gradients") {
    for (std::uint64_t seed : {101ULL, 102ULL, 103ULL}) {
        SdfNetwork net = tiny_random_net(seed, 2 + seed % 2, 16, seed % 2 ? 1 : 0,
                                         seed % 2 ? 10.0 : 100.0);
        RandomEngine rng(seed * 13);
        const Vec3 x = rng.point_in_box(Aabb::cube(1.0));

        // L = (|grad f| - 1)^2 at a single point.
        auto loss = [&] {
            const SdfEval eval = net.forward_with_input_gradient(x);
            const double r = eval.gradient.norm() - 1.0;
            return r * r;
        };
        Eigen::VectorXd analytic = Eigen::VectorXd::Zero(net.parameter_count());
        {
            const SdfEval eval = net.forward_with_input_gradient(x);
            const double norm = eval.gradient.norm();
            REQUIRE(norm > 1e-6);
            const Vec3 upstream = (2.0 * (norm - 1.0) / norm) * eval.gradient;
            net.accumulate_param_gradients(x, 0.0, upstream, analytic);
        }
        Eigen::VectorXd params = net.parameters();
        Eigen::VectorXd fd(net.parameter_count());
        const double h = 1e-5;
        for (int i = 0; i < net.parameter_count(); ++i) {
            const double saved = params[i];
            params[i] = saved + h;
            net.set_parameters(params);
            const double up = loss();
            params[i] = saved - h;
            net.set_parameters(params);
            const double down = loss();
            params[i] = saved;
            net.set_parameters(params);
            fd[i] = (up - down) / (2 * h);
        }
        CHECK(gsreg::testing::gradient_rel_error(analytic, fd) <= 1e-3);
    }
}

TEST_CASE("batched backward matches accumulation") {
    const SdfNetwork net = tiny_random_net(55, 2, 16, 0);
    RandomEngine rng(99);
    std::vector<Vec3> xs;
    std::vector<double> upstream;
    for (int i = 0; i < 8; ++i) {
        xs.push_back(rng.point_in_box(Aabb::cube(1.0)));
        upstream.push_back(rng.normal());
    }
    const Eigen::VectorXd batch = net.backward(xs, upstream);
    Eigen::VectorXd manual = Eigen::VectorXd::Zero(net.parameter_count());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        net.accumulate_param_gradients(xs[i], upstream[i], Vec3::Zero(), manual);
    }
    CHECK((batch - manual).norm() == 0.0);
}

TEST_CASE("geometric initialization approximates a sphere") {
    EncodingConfig enc;  // paper-size encoding
    RandomEngine rng(2024);
    const double r0 = 0.5;
    SdfNetwork net = SdfNetwork::geometric(enc, 8, 256, 4, 100.0, r0, rng);

    CHECK(net.forward(Vec3::Zero()) < 0.0);

    RandomEngine points(7);
    double worst = 0.0;
    int correct_signs = 0, signed_points = 0;
    for (int i = 0; i < 1000; ++i) {
        Vec3 dir = points.normal3();
        while (dir.norm() < 1e-9) dir = points.normal3();
        dir.normalize();
        const double radius = points.uniform(0.0, 1.0);
        const Vec3 x = radius * dir;
        const double f = net.forward(x);
        const double sdf = x.norm() - r0;
        worst = std::max(worst, std::abs(f - sdf));
        if (std::abs(sdf) > 0.1) {
            ++signed_points;
            if ((f > 0) == (sdf > 0)) ++correct_signs;
        }
    }
    CHECK(worst < 0.1);
    CHECK(correct_signs == signed_points);

    // Points at twice the radius are outside.
    for (int i = 0; i < 1000; ++i) {
        Vec3 dir = points.normal3();
        while (dir.norm() < 1e-9) dir = points.normal3();
        CHECK(net.forward(2.0 * r0 * dir.normalized()) > 0.0);
    }

    // Loose Monte-Carlo eikonal sanity over the unit ball.
    double residual = 0.0;
    int count = 0;
    while (count < 1000) {
        const Vec3 x = points.point_in_box(Aabb::cube(1.0));
        if (x.norm() > 1.0) continue;
        residual += std::abs(net.forward_with_input_gradient(x).gradient.norm() - 1.0);
        ++count;
    }
    CHECK(residual / count < 0.5);
}

TEST_CASE("checkpoint round trip and corruption detection") {
    const auto dir = std::filesystem::temp_directory_path() / "gsreg_net_ckpt";
    std::filesystem::create_directories(dir);
    const auto path = dir / "net.bin";

    SdfNetwork net = tiny_random_net(404, 3, 16, 1, 25.0);
    net.set_domain(DomainMap{Vec3{0.1, 0.2, 0.3}, 2.5});
    const Aabb bounds{Vec3{-1, -2, -3}, Vec3{1, 2, 3}};
    net.save(path, &bounds);

    const LoadedNetwork loaded = SdfNetwork::load(path);
    CHECK(loaded.has_bounds);
    CHECK((loaded.bounds.min - bounds.min).norm() == 0.0);
    CHECK(loaded.net.hidden_layers() == 3);
    CHECK(loaded.net.width() == 16);
    CHECK(loaded.net.skip_at() == 1);
    CHECK(loaded.net.beta() == 25.0);
    CHECK(loaded.net.domain().radius == 2.5);

    // float32 storage: parameters agree to single precision.
    RandomEngine rng(5);
    for (int i = 0; i < 20; ++i) {
        const Vec3 x = rng.point_in_box(bounds);
        CHECK(std::abs(loaded.net.forward(x) - net.forward(x)) < 1e-4);
    }

    // Truncation and bad magic are rejected.
    {
        std::ofstream bad(dir / "bad_magic.bin", std::ios::binary);
        bad << "NOPE";
    }
    CHECK_THROWS_AS(SdfNetwork::load(dir / "bad_magic.bin"), std::runtime_error);
    {
        std::ifstream in(path, std::ios::binary);
        std::string data((std::istreambuf_iterator<char>(in)), {});
        std::ofstream out(dir / "truncated.bin", std::ios::binary);
        out.write(data.data(), static_cast<std::streamsize>(data.size() / 2));
    }
    CHECK_THROWS_AS(SdfNetwork::load(dir / "truncated.bin"), std::runtime_error);
}

TEST_CASE("domain map preserves gradients and shifts values") {
    SdfNetwork net = tiny_random_net(606, 2, 16, 0);
    SdfNetwork mapped = net;
    const Vec3 center{0.3, -0.2, 0.1};
    const double radius = 2.0;
    mapped.set_domain(DomainMap{center, radius});

    RandomEngine rng(8);
    for (int i = 0; i < 20; ++i) {
        const Vec3 u = rng.point_in_box(Aabb::cube(1.0));
        const Vec3 x = center + radius * u;
        CHECK(mapped.forward(x) == doctest::Approx(radius * net.forward(u)).epsilon(1e-12));
        const Vec3 g_mapped = mapped.forward_with_input_gradient(x).gradient;
        const Vec3 g_ref = net.forward_with_input_gradient(u).gradient;
        CHECK((g_mapped - g_ref).norm() < 1e-12);
    }
}
