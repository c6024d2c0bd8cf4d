#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "varac/mdp.hpp"

namespace varac {

enum class EnvFamily { random, portfolio, gridworld };

EnvFamily parse_env_family(const std::string& name);
std::string to_string(EnvFamily f);

struct EnvSpec {
    EnvFamily family = EnvFamily::random;
    std::size_t n_states = 4;
    std::size_t n_actions = 2;
    std::uint64_t seed = 0;
    double mix = 0.05;
    double reward_scale = 1.0;
    // portfolio only
    double safe_return = 0.4;
    double risky_low = 0.0;
    double risky_high = 1.0;
};

/// random: Dirichlet(1) rows mixed toward uniform by `mix`, rewards
/// U[-1, 1] * reward_scale.
/// portfolio: states {hold, up, down}; action 0 (safe) moves to hold, action
/// 1 (risky) to up or down with probability 1/2. Rewards depend on the state
/// only: safe_return, risky_high, risky_low. No mixing.
/// gridworld: 3 x (n_states / 3) cliff walk with four slippery moves.
/// Throws SpecInvalid.
TabularMdp generate(const EnvSpec& spec);

/// Irreducible and aperiodic.
bool is_ergodic(const Eigen::MatrixXd& chain);

/// Modulus of the second largest eigenvalue of a stochastic matrix.
double second_eigenvalue_modulus(const Eigen::MatrixXd& chain);

} // namespace varac
