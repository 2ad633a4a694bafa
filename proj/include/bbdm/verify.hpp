#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "bbdm/bridge.hpp"

namespace bbdm {

using ReverseMeanFn = std::function<GaussianParams(const BridgeSchedule&, const StateVector& x_t, const StateVector& y,
                                                   const StateVector& eps_pred, int t)>;

struct VerifyOptions {
    std::uint64_t seed = 0;
    /// Implementation under test for the posterior and sign families.
    ReverseMeanFn reverse_mean = bbdm::reverse_mean;
};

struct FamilyResult {
    std::string name;
    int cases = 0;
    double tolerance = 0.0;
    double worst = 0.0;  // largest observed error; compared with <= tolerance
    double seconds = 0.0;
    bool pass = false;
};

struct VerifyReport {
    std::vector<FamilyResult> families;
    bool all_pass() const;
};

/// Endpoints, symmetry, variance recursion, posterior variance, c_x + c_y = 1 and
/// the midpoint peak for T in {2, 3, 10, 37, 1000} and s in {0.5, 1, 2, 4}.
FamilyResult check_schedule_identities();

/// Grid-Bayes posterior moments vs the closed form and vs the reverse step fed the
/// true target, on randomized scalar cases.
FamilyResult check_posterior_vs_grid(const VerifyOptions& options);

/// Reverse step with the true target vs the posterior mean, multi-dimensional.
FamilyResult check_sign_convention(const VerifyOptions& options);

/// Central differences (h = 1e-5) on sampled parameters of every layer.
FamilyResult check_gradients(const VerifyOptions& options);

/// Full grid with eta = 1 vs ancestral sampling, bit for bit.
FamilyResult check_sampler_equivalence(const VerifyOptions& options);

/// forward_sample at t = T and the first trajectory state both equal y bit for bit.
FamilyResult check_endpoint_exactness(const VerifyOptions& options);

VerifyReport run_verification(const VerifyOptions& options = {});

void print_verify_report(std::ostream& out, const VerifyReport& report);

}  // namespace bbdm
