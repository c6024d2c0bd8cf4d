#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "varac/mdp.hpp"

namespace varac {

/// Best deterministic policy for fixed (lambda, y): the average-reward MDP
/// with reward (1 + 2 lambda y) r - lambda r^2.
struct InnerMaxResult {
    std::vector<std::size_t> actions;
    StationaryPolicy pi;
    double value = 0.0;  // L(lambda, pi, y) at this alpha
    double rho = 0.0;
    double eta = 0.0;
};

/// Howard policy iteration from the all-zeros policy; improvement keeps the
/// current action on ties and otherwise takes the lowest maximizing index.
InnerMaxResult inner_max_policy(const TabularMdp& mdp, double lambda, double y, double alpha = 0.0);

struct SaddleCertificate {
    double lambda_res = 0.0;
    double y_res = 0.0;
    /// min over the lambda grid of the y-grid dual minus the exact dual at lambda*.
    double bracket_gap = 0.0;
    /// max_{pi, y} L(lambda*, pi, y) - L(lambda*, pi*, y*); the saddle
    /// inequalities hold up to this amount.
    double duality_gap = 0.0;
    double dual_value = 0.0;
    std::size_t candidate_policies = 0;
};

struct SaddleSolution {
    double lambda_star = 0.0;
    double y_star = 0.0;
    StationaryPolicy pi_star;
    double value = 0.0;  // L(lambda*, pi*, y*)
    double rho_star = 0.0;
    double variance_star = 0.0;
    SaddleCertificate certificate;
};

/// Grid search for the saddle point of the Fenchel-Lagrangian. Deterministic
/// maximizers found over the (lambda, y) grid define the dual function
/// exactly; lambda* minimizes it, and the primal policy is recovered as the
/// best feasible mixture of the policies active at lambda*.
SaddleSolution saddle_search(const TabularMdp& mdp, double alpha, double N, double lambda_res, double y_res);

std::string saddle_to_json(const SaddleSolution& sol);

/// sum_{t=0}^{T_trunc} E[g(r_t) - z | s_0 = s, a_0 = a] by propagating the
/// state distribution forward, with z the exact long-run mean of g.
Table truncated_value_oracle(const TabularMdp& mdp, const StationaryPolicy& pi, bool squared_reward,
                             std::size_t T_trunc);

/// |[L(lambda, pi1, y) - L(lambda, pi2, y)] -
///   E_{nu_1}[<(1 + 2 lambda y) Q^{pi2} - lambda W^{pi2}, pi1 - pi2>]|.
double verify_performance_difference(const TabularMdp& mdp, double lambda, double y, const StationaryPolicy& pi1,
                                     const StationaryPolicy& pi2);

struct Diagnostics {
    double phi_star = 0.0;
    double psi_star = 0.0;
    double perf_diff_residual = 0.0;
    std::optional<double> c_k;
    std::optional<double> d_k;
};

/// Density-ratio moments of pi_ref against pi_k, weighted by sigma_k.
/// Throws DivisionBySupportZero when pi_0 or sigma_k vanishes where needed.
Diagnostics density_diagnostics(const TabularMdp& mdp, const StationaryPolicy& pi_ref, const StationaryPolicy& pi_k,
                                const StationaryPolicy& pi_0);

} // namespace varac
