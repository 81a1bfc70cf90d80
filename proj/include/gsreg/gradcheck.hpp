#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gsreg {

struct GradcheckCase {
    std::string name;
    int instances = 0;
    double tolerance = 0.0;
    double worst_error = 0.0;  // worst relative error seen over all instances
    bool pass = false;
};

struct GradcheckReport {
    std::vector<GradcheckCase> cases;

    bool all_pass() const {
        for (const auto& c : cases)
            if (!c.pass) return false;
        return !cases.empty();
    }
};

/// Checks every analytic gradient path against central finite differences:
/// erank and attach at 1e-4 relative, the sampled losses and network
/// input/parameter gradients at 1e-3. Relative error is measured on whole
/// gradient vectors: |a - fd| / max(|a|, |fd|, 1e-12).
GradcheckReport run_gradcheck(std::uint64_t seed, int instances_per_case = 100);

/// One line per case plus a verdict; returns report.all_pass().
bool print_gradcheck_report(const GradcheckReport& report, std::ostream& os);

}  // namespace gsreg
