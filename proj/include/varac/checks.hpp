#pragma once

#include <string>
#include <vector>

#include "varac/mdp.hpp"
#include "varac/rng.hpp"

namespace varac {

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
};

struct CheckOptions {
    /// Multiplies every tolerance; the CLI's failure-injection hook sets it
    /// to something tiny.
    double tolerance_scale = 1.0;
};

/// Identity and invariant suite on built-in seeded instances.
std::vector<CheckResult> run_checks(const CheckOptions& opts = {});

/// Strictly positive random policy (normalized exponentials).
StationaryPolicy random_policy(std::size_t n_states, std::size_t n_actions, Rng& rng);

} // namespace varac
