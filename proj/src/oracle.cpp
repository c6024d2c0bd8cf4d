#include "varac/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "varac/errors.hpp"
#include "varac/learner.hpp"

namespace varac {

namespace {

Table modified_reward(const TabularMdp& mdp, double lambda, double y) {
    const Table& r = mdp.rewards();
    return (1.0 + 2.0 * lambda * y) * r.array() - lambda * r.array().square();
}

std::vector<std::size_t> policy_iteration(const TabularMdp& mdp, const Table& reward, std::vector<std::size_t> actions) {
    const std::size_t S = mdp.n_states();
    const std::size_t A = mdp.n_actions();
    const double tol = 1e-10 * (1.0 + reward.cwiseAbs().maxCoeff());
    for (int iter = 0; iter < 10'000; ++iter) {
        const auto dv = differential_values(mdp, StationaryPolicy::deterministic(actions, A), reward);
        bool changed = false;
        for (std::size_t s = 0; s < S; ++s) {
            const auto row = dv.q.row(static_cast<Eigen::Index>(s));
            const double best = row.maxCoeff();
            if (best <= row(static_cast<Eigen::Index>(actions[s])) + tol) continue;
            for (std::size_t a = 0; a < A; ++a) {
                if (row(static_cast<Eigen::Index>(a)) >= best - tol) {
                    actions[s] = a;
                    break;
                }
            }
            changed = true;
        }
        if (!changed) return actions;
    }
    throw Error("policy iteration did not terminate");
}

struct Candidate {
    std::vector<std::size_t> actions;
    double rho = 0.0;
    double variance = 0.0;
    double line(double lambda, double alpha) const { return rho + lambda * (alpha - variance); }
};

StationaryPolicy mix(const StationaryPolicy& a, const StationaryPolicy& b, double theta) {
    Table t = (1.0 - theta) * a.probs() + theta * b.probs();
    // Renormalize rows against rounding.
    for (Eigen::Index s = 0; s < t.rows(); ++s) t.row(s) /= t.row(s).sum();
    return StationaryPolicy(std::move(t));
}

} // namespace

InnerMaxResult inner_max_policy(const TabularMdp& mdp, double lambda, double y, double alpha) {
    if (lambda < 0.0) throw Error("inner_max_policy: lambda must be non-negative");
    const Table reward = modified_reward(mdp, lambda, y);
    auto actions = policy_iteration(mdp, reward, std::vector<std::size_t>(mdp.n_states(), 0));
    auto pi = StationaryPolicy::deterministic(actions, mdp.n_actions());
    const auto ev = exact_evaluation(mdp, pi);
    InnerMaxResult out{std::move(actions), std::move(pi), lagrangian(lambda, ev.rho, ev.eta, y, alpha), ev.rho, ev.eta};
    return out;
}

SaddleSolution saddle_search(const TabularMdp& mdp, double alpha, double N, double lambda_res, double y_res) {
    if (!(lambda_res > 0.0) || !(y_res > 0.0)) throw Error("saddle_search: grid resolutions must be positive");
    if (!(N > 0.0)) throw Error("saddle_search: N must be positive");
    const double M = mdp.reward_bound();
    const auto n_lambda = static_cast<std::size_t>(std::floor(N / lambda_res + 1e-9)) + 1;
    const auto n_y = static_cast<std::size_t>(std::floor(2.0 * M / y_res + 1e-9)) + 1;
    auto lambda_at = [&](std::size_t i) { return std::min(N, static_cast<double>(i) * lambda_res); };
    auto y_at = [&](std::size_t j) { return std::min(M, -M + static_cast<double>(j) * y_res); };

    // Sweep the grid, collecting every deterministic maximizer.
    std::set<std::vector<std::size_t>> found;
    std::vector<double> grid_dual(n_lambda, -std::numeric_limits<double>::infinity());
#pragma omp parallel
    {
        std::set<std::vector<std::size_t>> local;
#pragma omp for schedule(dynamic)
        for (std::size_t i = 0; i < n_lambda; ++i) {
            const double lambda = lambda_at(i);
            std::vector<std::size_t> warm(mdp.n_states(), 0);
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n_y; ++j) {
                const double y = y_at(j);
                warm = policy_iteration(mdp, modified_reward(mdp, lambda, y), warm);
                const auto ev = exact_evaluation(mdp, StationaryPolicy::deterministic(warm, mdp.n_actions()));
                best = std::max(best, lagrangian(lambda, ev.rho, ev.eta, y, alpha));
                local.insert(warm);
            }
            grid_dual[i] = best;
        }
#pragma omp critical
        found.insert(local.begin(), local.end());
    }

    std::vector<Candidate> cands;
    cands.reserve(found.size());
    for (const auto& acts : found) {
        const auto ev = exact_evaluation(mdp, StationaryPolicy::deterministic(acts, mdp.n_actions()));
        cands.push_back({acts, ev.rho, ev.variance});
    }

    // The dual is the upper envelope of one line per candidate; its minimum
    // over [0, N] sits at an endpoint or at a pairwise crossing.
    auto dual = [&](double lambda) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& c : cands) best = std::max(best, c.line(lambda, alpha));
        return best;
    };
    std::vector<double> probes{0.0, N};
    for (std::size_t i = 0; i < cands.size(); ++i) {
        for (std::size_t j = i + 1; j < cands.size(); ++j) {
            const double dv = cands[j].variance - cands[i].variance;
            if (std::abs(dv) < 1e-15) continue;
            const double lam = (cands[j].rho - cands[i].rho) / dv;
            if (lam > 0.0 && lam < N) probes.push_back(lam);
        }
    }
    std::sort(probes.begin(), probes.end());
    double lambda_star = 0.0;
    double dual_star = std::numeric_limits<double>::infinity();
    for (double lam : probes) {
        const double g = dual(lam);
        if (g < dual_star - 1e-13) {
            dual_star = g;
            lambda_star = lam;
        }
    }

    // Primal recovery among the policies active at lambda*.
    std::vector<const Candidate*> feasible;
    std::vector<const Candidate*> infeasible;
    for (const auto& c : cands) {
        if (c.line(lambda_star, alpha) < dual_star - 1e-9) continue;
        (c.variance <= alpha + 1e-12 ? feasible : infeasible).push_back(&c);
    }
    if (feasible.empty()) {
        for (const auto& c : cands) {
            if (c.variance <= alpha + 1e-12) feasible.push_back(&c);
        }
    }

    const std::size_t A = mdp.n_actions();
    std::optional<StationaryPolicy> best_pi;
    double best_rho = -std::numeric_limits<double>::infinity();
    double best_var = 0.0;
    for (const auto* f : feasible) {
        if (f->rho > best_rho) {
            best_rho = f->rho;
            best_var = f->variance;
            best_pi = StationaryPolicy::deterministic(f->actions, A);
        }
    }
    for (const auto* f : feasible) {
        const auto pa = StationaryPolicy::deterministic(f->actions, A);
        for (const auto* g : infeasible) {
            const auto pb = StationaryPolicy::deterministic(g->actions, A);
            double lo = 0.0;
            double hi = 1.0;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                (exact_evaluation(mdp, mix(pa, pb, mid)).variance <= alpha ? lo : hi) = mid;
            }
            auto pm = mix(pa, pb, lo);
            const auto ev = exact_evaluation(mdp, pm);
            if (ev.rho > best_rho) {
                best_rho = ev.rho;
                best_var = ev.variance;
                best_pi = std::move(pm);
            }
        }
    }
    if (!best_pi) {
        // Constraint infeasible for every candidate: report the least risky one.
        const auto it = std::min_element(cands.begin(), cands.end(),
                                         [](const Candidate& a, const Candidate& b) { return a.variance < b.variance; });
        best_pi = StationaryPolicy::deterministic(it->actions, A);
        best_rho = it->rho;
        best_var = it->variance;
    }

    SaddleSolution sol{lambda_star, best_rho, *best_pi, 0.0, best_rho, best_var, {}};
    sol.value = best_rho - lambda_star * (best_var - alpha);
    sol.certificate.lambda_res = lambda_res;
    sol.certificate.y_res = y_res;
    sol.certificate.dual_value = dual_star;
    sol.certificate.duality_gap = std::max(0.0, dual_star - sol.value);
    sol.certificate.bracket_gap = *std::min_element(grid_dual.begin(), grid_dual.end()) - dual_star;
    sol.certificate.candidate_policies = cands.size();
    return sol;
}

std::string saddle_to_json(const SaddleSolution& sol) {
    nlohmann::json pi = nlohmann::json::array();
    for (Eigen::Index s = 0; s < sol.pi_star.probs().rows(); ++s) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index a = 0; a < sol.pi_star.probs().cols(); ++a) row.push_back(sol.pi_star.probs()(s, a));
        pi.push_back(std::move(row));
    }
    nlohmann::json doc;
    doc["lambda_star"] = sol.lambda_star;
    doc["y_star"] = sol.y_star;
    doc["pi_star"] = std::move(pi);
    doc["value"] = sol.value;
    doc["rho_star"] = sol.rho_star;
    doc["variance_star"] = sol.variance_star;
    doc["certificate"] = {{"lambda_res", sol.certificate.lambda_res},
                          {"y_res", sol.certificate.y_res},
                          {"bracket_gap", sol.certificate.bracket_gap},
                          {"duality_gap", sol.certificate.duality_gap},
                          {"dual_value", sol.certificate.dual_value},
                          {"candidate_policies", sol.certificate.candidate_policies}};
    return doc.dump(2) + "\n";
}

Table truncated_value_oracle(const TabularMdp& mdp, const StationaryPolicy& pi, bool squared_reward,
                             std::size_t T_trunc) {
    if (T_trunc < 1) throw Error("truncated_value_oracle: T_trunc must be at least 1");
    const auto S = static_cast<Eigen::Index>(mdp.n_states());
    const auto A = static_cast<Eigen::Index>(mdp.n_actions());
    const Table g = squared_reward ? Table(mdp.rewards().array().square()) : mdp.rewards();
    const Eigen::MatrixXd chain = induced_chain(mdp, pi);
    const Vec nu = stationary_distribution(chain);
    const Vec g_pi = (pi.probs().array() * g.array()).rowwise().sum();
    const double z = nu.dot(g_pi);
    const Eigen::MatrixXd chain_t = chain.transpose();

    Table out(S, A);
#pragma omp parallel for collapse(2) schedule(static)
    for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index a = 0; a < A; ++a) {
            double total = g(s, a) - z;
            Vec dist = mdp.transition().row(s * A + a).transpose();
            for (std::size_t t = 1; t <= T_trunc; ++t) {
                total += dist.dot(g_pi) - z;
                dist = chain_t * dist;
            }
            out(s, a) = total;
        }
    }
    return out;
}

double verify_performance_difference(const TabularMdp& mdp, double lambda, double y, const StationaryPolicy& pi1,
                                     const StationaryPolicy& pi2) {
    const auto e1 = exact_evaluation(mdp, pi1);
    const auto e2 = exact_evaluation(mdp, pi2);
    const double lhs = lagrangian(lambda, e1.rho, e1.eta, y, 0.0) - lagrangian(lambda, e2.rho, e2.eta, y, 0.0);
    const Table adv = (1.0 + 2.0 * lambda * y) * e2.q - lambda * e2.w;
    const Table diff = pi1.probs() - pi2.probs();
    const Vec per_state = (adv.array() * diff.array()).rowwise().sum();
    return std::abs(lhs - e1.nu.dot(per_state));
}

Diagnostics density_diagnostics(const TabularMdp& mdp, const StationaryPolicy& pi_ref, const StationaryPolicy& pi_k,
                                const StationaryPolicy& pi_0) {
    const auto e_ref = exact_evaluation(mdp, pi_ref);
    const auto e_k = exact_evaluation(mdp, pi_k);
    double phi_sq = 0.0;
    double psi_sq = 0.0;
    for (Eigen::Index s = 0; s < e_k.sigma.rows(); ++s) {
        for (Eigen::Index a = 0; a < e_k.sigma.cols(); ++a) {
            const double w = e_k.sigma(s, a);
            if (w <= 0.0) {
                if (e_ref.sigma(s, a) > 0.0) {
                    throw DivisionBySupportZero("sigma_k vanishes where the reference occupancy does not");
                }
                continue;
            }
            const double base = pi_0.probs()(s, a);
            if (base <= 0.0) throw DivisionBySupportZero("pi_0 vanishes on the support of sigma_k");
            const double dpi = (pi_ref.probs()(s, a) - pi_k.probs()(s, a)) / base;
            const double dsig = e_ref.sigma(s, a) / w - e_ref.nu(s) / e_k.nu(s);
            phi_sq += w * dpi * dpi;
            psi_sq += w * dsig * dsig;
        }
    }
    Diagnostics d;
    d.phi_star = std::sqrt(phi_sq);
    d.psi_star = std::sqrt(psi_sq);
    d.perf_diff_residual = verify_performance_difference(mdp, 0.0, 0.0, pi_ref, pi_k);
    return d;
}

} // namespace varac
