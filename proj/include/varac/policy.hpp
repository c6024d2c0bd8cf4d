#pragma once

#include <cstddef>

#include "varac/mdp.hpp"
#include "varac/model.hpp"

namespace varac {

/// pi(a|s) proportional to exp(f(s,a) / temperature).
class EnergyPolicy {
public:
    EnergyPolicy(FunctionModel energy, double temperature);

    const FunctionModel& energy() const { return energy_; }
    double temperature() const { return temperature_; }
    /// f(s, a) for every pair, evaluated once at construction.
    const Table& energies() const { return energies_; }

    /// Row-stochastic table of action probabilities.
    StationaryPolicy stationary() const;

private:
    FunctionModel energy_;
    double temperature_;
    Table energies_;
};

/// Max-subtracted softmax. Throws NonFiniteEnergy on NaN/inf input.
Vec softmax(const Vec& logits);

Vec policy_probs(const EnergyPolicy& pol, std::size_t s);

/// sum_a p log(p/q) with 0 log 0 = 0. Throws SupportViolation when q(a) = 0 < p(a).
double kl(const Vec& p, const Vec& q);

/// Scalars shared by the actor target and the closed-form update.
struct ImprovementTerms {
    double lambda_bar = 0.0;
    double y_bar = 0.0;
    double beta_k = 1.0;
    double tau_k = 1.0;  // temperature of the previous policy
};

/// Exponent of the improved policy at one (s, a):
/// beta^-1 (1 + 2 lambda y) Q - beta^-1 lambda W + tau_k^-1 f_prev.
double improved_logit(double q, double w, double f_prev, const ImprovementTerms& t);

/// Actor regression target: tau_{k+1} times the improved logit.
double regression_target(double q, double w, double f_prev, const ImprovementTerms& t, double tau_k1);

/// Closed-form maximizer of the KL-penalized linearized Lagrangian at one state.
Vec closed_form_improved_policy(const Vec& q_row, const Vec& w_row, const Vec& f_prev_row, const ImprovementTerms& t);

/// <(1 + 2 lambda y) Q - lambda W, pi> - beta KL(pi || pi_prev) at one state.
double penalized_objective(const Vec& pi, const Vec& q_row, const Vec& w_row, const Vec& pi_prev,
                           const ImprovementTerms& t);

} // namespace varac
