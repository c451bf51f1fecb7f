// SPDX-License-Identifier: Apache-2.0
//
// Gradient fidelity harness: checks every analytical gradient in the repo
// (backbone layers, adapter block slices, gate weights) against central
// finite differences on random tiny instances.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rolecast {

struct GradCheckResult {
    std::string component;
    std::uint64_t seed = 0;
    double max_relative_error = 0.0;
};

// One tiny random instance per seed (vocab 8, d_model 4, two blocks of
// rank 2); returns the worst relative error per component per seed.
std::vector<GradCheckResult> run_gradient_checks(std::size_t seeds,
                                                 double step = 1e-5,
                                                 std::uint64_t base_seed = 0);

double worst_relative_error(const std::vector<GradCheckResult>& results);

}  // namespace rolecast
