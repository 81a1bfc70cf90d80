#include "gsreg/gradcheck.hpp"

#include "gsreg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

namespace gsreg {
namespace {

double rel_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& fd) {
    const double scale = std::max({analytic.norm(), fd.norm(), 1e-12});
    return (analytic - fd).norm() / scale;
}

Eigen::VectorXd central_difference(int n, double h, const std::function<double(int)>& get,
                                   const std::function<void(int, double)>& set,
                                   const std::function<double()>& eval) {
    Eigen::VectorXd fd(n);
    for (int i = 0; i < n; ++i) {
        const double saved = get(i);
        set(i, saved + h);
        const double up = eval();
        set(i, saved - h);
        const double down = eval();
        set(i, saved);
        fd[i] = (up - down) / (2.0 * h);
    }
    return fd;
}

Vec3 random_scales(RandomEngine& rng) {
    // Log-uniform in [0.05, 2].
    auto draw = [&] { return 0.05 * std::exp(rng.uniform() * std::log(2.0 / 0.05)); };
    return Vec3{draw(), draw(), draw()};
}

// Scale triples near the smallest-scale tie or the erank = 2 kink are
// redrawn; the subgradient there is deliberate, not an error.
Vec3 smooth_scales(RandomEngine& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const Vec3 s = random_scales(rng);
        Vec3 sorted = s;
        std::sort(sorted.data(), sorted.data() + 3);
        if (sorted[1] - sorted[0] < 1e-3 || sorted[2] - sorted[1] < 1e-3) continue;
        if (std::abs(effective_rank(s).erank - 2.0) < 1e-3) continue;
        return s;
    }
    return Vec3{1.0, 0.5, 0.25};
}

GaussianScene small_scene(RandomEngine& rng, int count, bool smooth) {
    const Aabb bounds = Aabb::cube(1.0);
    std::vector<Gaussian> gaussians;
    for (int i = 0; i < count; ++i) {
        Gaussian g;
        g.mean = 0.8 * rng.normal3().cwiseMax(-1.0).cwiseMin(1.0);
        g.scales = smooth ? smooth_scales(rng) : 0.2 * Vec3::Ones() + 0.1 * random_scales(rng);
        g.rotation = rng.unit_quaternion();
        g.opacity = rng.uniform(0.2, 1.0);
        gaussians.push_back(g);
    }
    return GaussianScene::create(std::move(gaussians), bounds, 0);
}

SdfNetwork small_net(RandomEngine& rng, std::uint64_t instance) {
    EncodingConfig enc;
    enc.num_bands = 2 + static_cast<int>(instance % 3);
    enc.include_raw = true;
    const int layers = 2 + static_cast<int>(instance % 2);
    const int skip = (layers >= 3 && instance % 2 == 1) ? 1 : 0;
    const double beta = (instance % 2 == 0) ? 100.0 : 10.0;
    return SdfNetwork::randomized(enc, layers, 16, skip, beta, 1.0, rng);
}

double check_erank_instance(RandomEngine& rng) {
    const GaussianScene scene = small_scene(rng, 3 + static_cast<int>(rng.integer(6)), true);
    GaussianScene probe = scene;
    const ErankLossResult result = erank_loss(scene);

    Eigen::VectorXd analytic(3 * scene.size());
    for (std::size_t k = 0; k < scene.size(); ++k) {
        analytic.segment<3>(3 * static_cast<Eigen::Index>(k)) = result.d_scales[k];
    }
    const Eigen::VectorXd fd = central_difference(
        static_cast<int>(analytic.size()), 1e-5,
        [&](int i) { return probe.gaussians[static_cast<std::size_t>(i / 3)].scales[i % 3]; },
        [&](int i, double v) {
            probe.gaussians[static_cast<std::size_t>(i / 3)].scales[i % 3] = v;
        },
        [&] { return erank_loss(probe).value; });
    return rel_error(analytic, fd);
}

double check_attach_instance(RandomEngine& rng) {
    // Rejects configurations whose nearest-neighbor assignment could flip
    // inside the finite-difference stencil.
    for (int attempt = 0; attempt < 100; ++attempt) {
        GaussianScene scene = small_scene(rng, 5, false);
        std::vector<Vec3> targets;
        for (int i = 0; i < 20; ++i) targets.push_back(rng.point_in_box(scene.bounds));

        auto margin_ok = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
            for (const Vec3& q : from) {
                double best = 1e300, second = 1e300;
                for (const Vec3& p : to) {
                    const double d = (p - q).norm();
                    if (d < best) {
                        second = best;
                        best = d;
                    } else if (d < second) {
                        second = d;
                    }
                }
                if (second - best < 1e-3) return false;
            }
            return true;
        };
        std::vector<Vec3> means;
        for (const Gaussian& g : scene.gaussians) means.push_back(g.mean);
        if (!margin_ok(targets, means) || !margin_ok(means, targets)) continue;

        std::vector<Vec3> analytic_means;
        attach_loss(scene, targets, &analytic_means);
        Eigen::VectorXd analytic(3 * scene.size());
        for (std::size_t k = 0; k < scene.size(); ++k) {
            analytic.segment<3>(3 * static_cast<Eigen::Index>(k)) = analytic_means[k];
        }
        const Eigen::VectorXd fd = central_difference(
            static_cast<int>(analytic.size()), 1e-5,
            [&](int i) { return scene.gaussians[static_cast<std::size_t>(i / 3)].mean[i % 3]; },
            [&](int i, double v) {
                scene.gaussians[static_cast<std::size_t>(i / 3)].mean[i % 3] = v;
            },
            [&] { return attach_loss(scene, targets); });
        return rel_error(analytic, fd);
    }
    return 1e300;  // could not build a well-separated instance
}

double check_input_grad_instance(RandomEngine& rng, std::uint64_t instance) {
    const SdfNetwork net = small_net(rng, instance);
    Vec3 x = rng.point_in_box(Aabb::cube(1.0));
    const SdfEval eval = net.forward_with_input_gradient(x);
    const Eigen::VectorXd analytic = eval.gradient;
    const Eigen::VectorXd fd = central_difference(
        3, 1e-4, [&](int i) { return x[i]; }, [&](int i, double v) { x[i] = v; },
        [&] { return net.forward(x); });
    return rel_error(analytic, fd);
}

double check_param_value_instance(RandomEngine& rng, std::uint64_t instance) {
    SdfNetwork net = small_net(rng, instance);
    const Vec3 x = rng.point_in_box(Aabb::cube(1.0));

    // L = f(x)^2.
    Eigen::VectorXd analytic = Eigen::VectorXd::Zero(net.parameter_count());
    net.accumulate_param_gradients(x, 2.0 * net.forward(x), Vec3::Zero(), analytic);

    Eigen::VectorXd params = net.parameters();
    const Eigen::VectorXd fd = central_difference(
        net.parameter_count(), 1e-5, [&](int i) { return params[i]; },
        [&](int i, double v) {
            params[i] = v;
            net.set_parameters(params);
        },
        [&] {
            const double f = net.forward(x);
            return f * f;
        });
    return rel_error(analytic, fd);
}

double check_eikonal_instance(RandomEngine& rng, std::uint64_t instance,
                              std::uint64_t sample_seed) {
    SdfNetwork net = small_net(rng, instance);
    const GaussianScene scene = small_scene(rng, 2, false);
    const int count = 8;

    Eigen::VectorXd analytic = Eigen::VectorXd::Zero(net.parameter_count());
    {
        RandomEngine sampler(sample_seed);
        eikonal_loss(net, scene, count, 3.0, sampler, &analytic);
    }
    Eigen::VectorXd params = net.parameters();
    const Eigen::VectorXd fd = central_difference(
        net.parameter_count(), 1e-5, [&](int i) { return params[i]; },
        [&](int i, double v) {
            params[i] = v;
            net.set_parameters(params);
        },
        [&] {
            RandomEngine sampler(sample_seed);  // common random numbers
            return eikonal_loss(net, scene, count, 3.0, sampler);
        });
    return rel_error(analytic, fd);
}

struct SdfGaussErrors {
    double net_err = 0.0;
    double scene_err = 0.0;
};

SdfGaussErrors check_sdf_gauss_instance(RandomEngine& rng, std::uint64_t instance,
                                        std::uint64_t sample_seed) {
    SdfNetwork net = small_net(rng, instance);
    GaussianScene scene = small_scene(rng, 3, false);
    const int spg = 3;

    Eigen::VectorXd analytic_net = Eigen::VectorXd::Zero(net.parameter_count());
    SceneGradients analytic_scene = SceneGradients::zero(scene.size());
    {
        RandomEngine sampler(sample_seed);
        sdf_gauss_loss(net, scene, spg, sampler, &analytic_net, &analytic_scene, true);
    }

    SdfGaussErrors errors;
    {
        Eigen::VectorXd params = net.parameters();
        const Eigen::VectorXd fd = central_difference(
            net.parameter_count(), 1e-5, [&](int i) { return params[i]; },
            [&](int i, double v) {
                params[i] = v;
                net.set_parameters(params);
            },
            [&] {
                RandomEngine sampler(sample_seed);
                return sdf_gauss_loss(net, scene, spg, sampler);
            });
        errors.net_err = rel_error(analytic_net, fd);
        net.set_parameters(params);
    }
    {
        // Means and scales together: 6 coordinates per Gaussian.
        const int n = 6 * static_cast<int>(scene.size());
        Eigen::VectorXd analytic(n);
        for (std::size_t k = 0; k < scene.size(); ++k) {
            analytic.segment<3>(6 * static_cast<Eigen::Index>(k)) = analytic_scene.means[k];
            analytic.segment<3>(6 * static_cast<Eigen::Index>(k) + 3) = analytic_scene.scales[k];
        }
        auto coord = [&](int i) -> double& {
            Gaussian& g = scene.gaussians[static_cast<std::size_t>(i / 6)];
            const int within = i % 6;
            return within < 3 ? g.mean[within] : g.scales[within - 3];
        };
        const Eigen::VectorXd fd = central_difference(
            n, 1e-5, [&](int i) { return coord(i); }, [&](int i, double v) { coord(i) = v; },
            [&] {
                RandomEngine sampler(sample_seed);
                return sdf_gauss_loss(net, scene, spg, sampler);
            });
        errors.scene_err = rel_error(analytic, fd);
    }
    return errors;
}

GradcheckCase summarize(std::string name, int instances, double tolerance,
                        const std::vector<double>& errors) {
    GradcheckCase c;
    c.name = std::move(name);
    c.instances = instances;
    c.tolerance = tolerance;
    c.worst_error = errors.empty() ? 1e300 : *std::max_element(errors.begin(), errors.end());
    c.pass = c.worst_error <= tolerance;
    return c;
}

}  // namespace

GradcheckReport run_gradcheck(std::uint64_t seed, int instances_per_case) {
    const int n = std::max(1, instances_per_case);
    GradcheckReport report;

    std::vector<double> erank_errs, attach_errs, input_errs, param_errs, eik_errs;
    std::vector<double> sdfg_net_errs, sdfg_scene_errs;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t inst = static_cast<std::uint64_t>(i);
        RandomEngine rng(seed * 1000003ULL + inst);
        erank_errs.push_back(check_erank_instance(rng));
        attach_errs.push_back(check_attach_instance(rng));
        input_errs.push_back(check_input_grad_instance(rng, inst));
        param_errs.push_back(check_param_value_instance(rng, inst));
        eik_errs.push_back(check_eikonal_instance(rng, inst, seed ^ (inst * 2654435761ULL)));
        const SdfGaussErrors sg =
            check_sdf_gauss_instance(rng, inst, seed ^ (inst * 0x9e3779b9ULL) ^ 0xabcdULL);
        sdfg_net_errs.push_back(sg.net_err);
        sdfg_scene_errs.push_back(sg.scene_err);
    }

    report.cases.push_back(summarize("erank_loss d/d(scales)", n, 1e-4, erank_errs));
    report.cases.push_back(summarize("attach_loss d/d(means)", n, 1e-4, attach_errs));
    report.cases.push_back(summarize("network d/d(input)", n, 1e-3, input_errs));
    report.cases.push_back(summarize("network d/d(params), f^2", n, 1e-3, param_errs));
    report.cases.push_back(summarize("eikonal_loss d/d(params)", n, 1e-3, eik_errs));
    report.cases.push_back(summarize("sdf_gauss_loss d/d(params)", n, 1e-3, sdfg_net_errs));
    report.cases.push_back(
        summarize("sdf_gauss_loss d/d(means, scales)", n, 1e-3, sdfg_scene_errs));
    return report;
}

bool print_gradcheck_report(const GradcheckReport& report, std::ostream& os) {
    for (const GradcheckCase& c : report.cases) {
        char line[160];
        std::snprintf(line, sizeof(line), "[%s] %-34s worst rel err %.3e (tol %.1e, %d instances)",
                      c.pass ? "PASS" : "FAIL", c.name.c_str(), c.worst_error, c.tolerance,
                      c.instances);
        os << line << '\n';
    }
    os << (report.all_pass() ? "gradcheck: all cases passed\n" : "gradcheck: FAILURES above\n");
    return report.all_pass();
}

}  // namespace gsreg
