#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "varac/learner.hpp"
#include "varac/mdp.hpp"
#include "varac/oracle.hpp"

namespace varac {

Schedule schedules(std::size_t k, std::size_t K, double beta, double gamma);

struct IterationMetrics {
    std::size_t k = 0;
    double lambda_bar = 0.0;
    double y_bar = 0.0;
    double rho_hat = 0.0;
    double eta_hat = 0.0;
    double var_hat = 0.0;
    double lagrangian_value = 0.0;
    std::optional<double> exact_rho;
    std::optional<double> exact_eta;
    std::optional<double> exact_var;
    std::optional<double> bellman_q_mse;
    std::optional<double> bellman_w_mse;
    std::optional<double> gap;  // L* - L(lambda_k, pi_k, y_k)
    std::optional<double> kl_to_opt;
    double wall_time_ms = 0.0;
    // not part of the CSV
    std::optional<double> c_k;
    std::optional<double> d_k;
};

struct RunResult {
    SaddleIterate final_iterate;
    std::vector<IterationMetrics> metrics;
    std::size_t ball_checks = 0;
    std::size_t ball_violations = 0;
    double wall_time_ms = 0.0;
};

/// Mean squared Bellman residual E_sigma[(Qhat - T Qhat)^2] of a critic
/// table under the exact dynamics and the exact gain of g.
double bellman_mse(const TabularMdp& mdp, const StationaryPolicy& pi, const Table& estimate, bool squared_reward);

/// E_{nu*}[KL(pi*(.|s) || pi(.|s))].
double kl_to_reference(const TabularMdp& mdp, const StationaryPolicy& ref, const StationaryPolicy& pi);

/// The outer loop. `oracle` (optional) enables the gap and KL columns.
RunResult varac_run(const TabularMdp& mdp, const LearnerConfig& cfg, const SaddleSolution* oracle = nullptr);

extern const char* const kMetricsHeader;

std::string metrics_to_csv(const std::vector<IterationMetrics>& rows);
/// Throws Error on a malformed header or row.
std::vector<IterationMetrics> metrics_from_csv(const std::string& text);

/// Run summary: config echo, seed, final scalars and acceptance flags.
std::string run_summary_json(const TabularMdp& mdp, const LearnerConfig& cfg, const RunResult& res,
                             const SaddleSolution* oracle);

} // namespace varac
