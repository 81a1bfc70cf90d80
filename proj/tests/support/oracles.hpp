#pragma once

#include "gsreg/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace gsreg::testing {

/// Independent long-double evaluation of the effective rank chain, straight
/// from the definition. Kept deliberately separate from the library path.
struct ErankOracle {
    long double q[3];
    long double entropy;
    long double erank;
};

inline ErankOracle erank_oracle(double s1, double s2, double s3) {
    const long double s[3] = {s1, s2, s3};
    long double total = 0.0L;
    for (long double v : s) total += v * v;
    ErankOracle out{};
    out.entropy = 0.0L;
    for (int i = 0; i < 3; ++i) {
        out.q[i] = s[i] * s[i] / total;
        const long double clamped = std::max(out.q[i], 1e-12L);
        out.entropy -= clamped * std::log(clamped);
    }
    out.erank = std::exp(out.entropy);
    return out;
}

inline long double erank_penalty_oracle(double s1, double s2, double s3, double epsilon) {
    const ErankOracle terms = erank_oracle(s1, s2, s3);
    const long double log_term = -std::log(terms.erank - 1.0L + static_cast<long double>(epsilon));
    return std::max(log_term, 0.0L) + std::min({(long double)s1, (long double)s2, (long double)s3});
}

/// Relative error between two gradient vectors, measured on the whole vector.
inline double gradient_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

}  // namespace gsreg::testing
