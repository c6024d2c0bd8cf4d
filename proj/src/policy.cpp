#include "varac/policy.hpp"

#include <cmath>

#include "varac/errors.hpp"

namespace varac {

EnergyPolicy::EnergyPolicy(FunctionModel energy, double temperature)
    : energy_(std::move(energy)), temperature_(temperature) {
    if (!(temperature_ > 0.0)) throw Error("temperature must be positive");
    energies_ = energy_.table();
}

StationaryPolicy EnergyPolicy::stationary() const {
    Table probs(energies_.rows(), energies_.cols());
    for (Eigen::Index s = 0; s < energies_.rows(); ++s) {
        probs.row(s) = softmax(energies_.row(s).transpose() / temperature_).transpose();
    }
    return StationaryPolicy(std::move(probs));
}

Vec softmax(const Vec& logits) {
    if (!logits.allFinite()) throw NonFiniteEnergy("energy contains NaN or infinity");
    const double top = logits.maxCoeff();
    Vec e = (logits.array() - top).exp();
    e /= e.sum();
    return e;
}

Vec policy_probs(const EnergyPolicy& pol, std::size_t s) {
    if (s >= static_cast<std::size_t>(pol.energies().rows())) throw IndexOutOfRange("state out of range");
    return softmax(pol.energies().row(static_cast<Eigen::Index>(s)).transpose() / pol.temperature());
}

double kl(const Vec& p, const Vec& q) {
    if (p.size() != q.size()) throw DimensionMismatch("kl: distributions differ in size");
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) <= 0.0) continue;
        if (q(i) <= 0.0) throw SupportViolation("kl: q(" + std::to_string(i) + ") = 0 where p > 0");
        total += p(i) * std::log(p(i) / q(i));
    }
    return std::max(total, 0.0);
}

double improved_logit(double q, double w, double f_prev, const ImprovementTerms& t) {
    const double inv_beta = 1.0 / t.beta_k;
    return inv_beta * (1.0 + 2.0 * t.lambda_bar * t.y_bar) * q - inv_beta * t.lambda_bar * w + f_prev / t.tau_k;
}

double regression_target(double q, double w, double f_prev, const ImprovementTerms& t, double tau_k1) {
    return tau_k1 * improved_logit(q, w, f_prev, t);
}

Vec closed_form_improved_policy(const Vec& q_row, const Vec& w_row, const Vec& f_prev_row, const ImprovementTerms& t) {
    if (q_row.size() != w_row.size() || q_row.size() != f_prev_row.size()) {
        throw DimensionMismatch("closed_form_improved_policy: row sizes differ");
    }
    if (!(t.beta_k > 0.0) || !(t.tau_k > 0.0)) throw Error("beta_k and tau_k must be positive");
    Vec logits(q_row.size());
    for (Eigen::Index a = 0; a < q_row.size(); ++a) logits(a) = improved_logit(q_row(a), w_row(a), f_prev_row(a), t);
    return softmax(logits);
}

double penalized_objective(const Vec& pi, const Vec& q_row, const Vec& w_row, const Vec& pi_prev,
                           const ImprovementTerms& t) {
    const Vec adv = (1.0 + 2.0 * t.lambda_bar * t.y_bar) * q_row - t.lambda_bar * w_row;
    return adv.dot(pi) - t.beta_k * kl(pi, pi_prev);
}

} // namespace varac
