#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "varac/mdp.hpp"
#include "varac/model.hpp"
#include "varac/policy.hpp"

namespace varac {

/// Everything the outer loop and the three inner loops need.
struct LearnerConfig {
    std::size_t K = 100;  // outer iterations
    std::size_t T = 10000;  // SGD / TD iterations and sample size per outer iteration
    double beta = 1.0;
    double gamma = 1.0;
    double N = 10.0;  // cap on the multiplier
    double alpha = 0.1;  // variance budget
    std::optional<double> zeta;   // actor step; T^{-1/2} when unset
    std::optional<double> delta;  // critic step; T^{-1/2} when unset
    FunctionClass actor_class = FunctionClass::tabular;
    FunctionClass critic_class = FunctionClass::tabular;
    NetSpec actor_net{64, 2, 10.0};
    NetSpec critic_q_net{64, 2, 10.0};
    NetSpec critic_w_net{64, 2, 10.0};
    std::size_t burn_in = 1000;
    std::uint64_t seed = 0;
    bool exact_metrics = true;
    /// Check the projection ball after every inner step (otherwise every
    /// 1000 steps). Violations throw InvariantViolation.
    bool debug_invariants = false;

    double actor_step() const;
    double critic_step() const;
    /// Throws ConfigError naming the first invalid field.
    void validate() const;
};

struct Schedule {
    double tau_next = 1.0;  // tau_{k+1}
    double beta_k = 1.0;
    double gamma_k = 1.0;
};

/// (lambda_k, pi_k, y_k) plus the critics fitted at iteration k.
struct SaddleIterate {
    std::size_t k = 0;
    double lambda_bar = 0.0;
    double y_bar = 0.0;
    EnergyPolicy actor;
    std::optional<FunctionModel> critic_q;
    std::optional<FunctionModel> critic_w;
    Schedule schedule;
};

enum class ValueKind { reward, squared_reward };

struct InnerLoopOptions {
    double stepsize = 0.01;
    bool check_every_step = false;
    std::size_t check_interval = 1000;
};

struct InnerLoopResult {
    FunctionModel averaged;  // mean of the iterates theta(0..T-1)
    std::size_t ball_checks = 0;
    std::size_t ball_violations = 0;
    double loss_head = 0.0;  // mean squared residual over the first 10% of steps
    double loss_tail = 0.0;  // ... and over the last 10%
};

/// Semi-gradient TD(0) for the differential value of r (kind = reward, z_bar
/// = rho_bar) or r^2 (kind = squared_reward, z_bar = eta_bar). Consumes the
/// transitions in order, projects after every step, and returns the path
/// average.
InnerLoopResult td_policy_evaluation(ValueKind kind, const Trajectory& samples, double z_bar, FunctionModel model0,
                                     const InnerLoopOptions& opts);

/// Same, drawing T fresh transitions from `pi` first.
InnerLoopResult td_policy_evaluation(ValueKind kind, const TabularMdp& mdp, const StationaryPolicy& pi, double z_bar,
                                     FunctionModel model0, std::size_t T, std::uint64_t seed,
                                     const InnerLoopOptions& opts, std::size_t burn_in = 1000);

/// Regression targets tau_{k+1} * improved logit for every (s, a).
Table actor_targets(const Table& q_est, const Table& w_est, const Table& f_prev, const ImprovementTerms& terms,
                    double tau_k1);

/// Projected SGD on (f(s, a_ref) - target(s, a_ref))^2 over the samples'
/// (s, a_ref) pairs; returns the path average.
InnerLoopResult actor_sgd(const Trajectory& samples, const Table& targets, FunctionModel model0,
                          const InnerLoopOptions& opts);

/// Projected descent step on the multiplier, clipped to [0, N].
double update_lambda(double lambda_bar, double y_bar, double rho_bar, double eta_bar, double alpha, double gamma_k,
                     double N);

/// The Fenchel variable's maximizer is the (estimated) average reward.
inline double update_y(double rho_bar) { return rho_bar; }

/// (1 + 2 lambda y) rho - lambda eta - lambda y^2 + lambda alpha.
inline double lagrangian(double lambda, double rho, double eta, double y, double alpha) {
    return (1.0 + 2.0 * lambda * y) * rho - lambda * eta - lambda * y * y + lambda * alpha;
}

} // namespace varac
