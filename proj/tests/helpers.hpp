#pragma once

#include "varac/checks.hpp"
#include "varac/envs.hpp"
#include "varac/mdp.hpp"

namespace testing {

inline varac::TabularMdp random_mdp(std::uint64_t seed, std::size_t S, std::size_t A) {
    varac::EnvSpec spec;
    spec.n_states = S;
    spec.n_actions = A;
    spec.seed = seed;
    return varac::generate(spec);
}

// Single state; every action loops back.
inline varac::TabularMdp one_state(const std::vector<double>& rewards) {
    const auto A = static_cast<Eigen::Index>(rewards.size());
    varac::Table r(1, A);
    for (Eigen::Index a = 0; a < A; ++a) r(0, a) = rewards[static_cast<std::size_t>(a)];
    return varac::TabularMdp(Eigen::MatrixXd::Ones(A, 1), r);
}

inline varac::TabularMdp portfolio() {
    varac::EnvSpec spec;
    spec.family = varac::EnvFamily::portfolio;
    return varac::generate(spec);
}

// Left fixed point by repeated multiplication.
inline varac::Vec power_iteration(const Eigen::MatrixXd& P, double tol = 1e-13) {
    varac::Vec nu = varac::Vec::Constant(P.rows(), 1.0 / static_cast<double>(P.rows()));
    for (int i = 0; i < 1'000'000; ++i) {
        varac::Vec next = P.transpose() * nu;
        next /= next.sum();
        const double diff = (next - nu).cwiseAbs().maxCoeff();
        nu = next;
        if (diff < tol) break;
    }
    return nu;
}

} // namespace testing
