#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "varac/rng.hpp"

namespace varac {

using Table = Eigen::MatrixXd;  // indexed [s][a]
using Vec = Eigen::VectorXd;

/// Finite average-reward MDP. Transitions are stored as an (S*A) x S matrix
/// whose row s*A + a is P(. | s, a). Immutable after construction.
class TabularMdp {
public:
    /// Validates every invariant; throws InvalidMdp naming the offending entry.
    TabularMdp(Eigen::MatrixXd transition, Table reward);

    std::size_t n_states() const { return static_cast<std::size_t>(reward_.rows()); }
    std::size_t n_actions() const { return static_cast<std::size_t>(reward_.cols()); }
    /// Dimension of the one-hot state-action embedding.
    std::size_t embed_dim() const { return n_states() * n_actions(); }
    std::size_t index(std::size_t s, std::size_t a) const { return s * n_actions() + a; }

    double p(std::size_t s, std::size_t a, std::size_t next) const {
        return transition_(static_cast<Eigen::Index>(index(s, a)), static_cast<Eigen::Index>(next));
    }
    auto next_dist(std::size_t s, std::size_t a) const {
        return transition_.row(static_cast<Eigen::Index>(index(s, a)));
    }
    const Eigen::MatrixXd& transition() const { return transition_; }
    double reward(std::size_t s, std::size_t a) const {
        return reward_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
    }
    const Table& rewards() const { return reward_; }
    /// M = max |r(s, a)|.
    double reward_bound() const { return reward_bound_; }

    bool operator==(const TabularMdp& other) const {
        return transition_ == other.transition_ && reward_ == other.reward_;
    }

private:
    Eigen::MatrixXd transition_;
    Table reward_;
    double reward_bound_ = 0.0;
};

/// pi(a | s) as an S x A row-stochastic table.
class StationaryPolicy {
public:
    explicit StationaryPolicy(Table probs);
    static StationaryPolicy uniform(std::size_t n_states, std::size_t n_actions);
    /// Deterministic policy from one action index per state.
    static StationaryPolicy deterministic(const std::vector<std::size_t>& actions, std::size_t n_actions);

    const Table& probs() const { return probs_; }
    double operator()(std::size_t s, std::size_t a) const {
        return probs_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
    }
    std::size_t n_states() const { return static_cast<std::size_t>(probs_.rows()); }
    std::size_t n_actions() const { return static_cast<std::size_t>(probs_.cols()); }

private:
    Table probs_;
};

/// Exact long-run quantities of a policy on a tabular MDP.
struct ExactEvaluation {
    Vec nu;       // stationary state distribution
    Table sigma;  // sigma(s, a) = pi(a|s) nu(s)
    double rho = 0.0;
    double eta = 0.0;
    double variance = 0.0;  // eta - rho^2
    Table q;                // differential Q for r
    Vec v;
    Table w;                // differential Q for r^2
    Vec u;
};

struct Transition {
    std::uint32_t s = 0;
    std::uint32_t a = 0;
    double r = 0.0;
    std::uint32_t next_s = 0;
    std::uint32_t next_a = 0;
    /// Action drawn from the reference (initial uniform) policy at s; used by
    /// the actor regression.
    std::uint32_t a_ref = 0;

    bool operator==(const Transition&) const = default;
};

struct Trajectory {
    std::vector<Transition> steps;
    std::uint64_t seed = 0;
};

struct RhoEta {
    double rho_bar = 0.0;
    double eta_bar = 0.0;
};

/// P_pi(s, s') = sum_a pi(a|s) P(s'|s, a).
Eigen::MatrixXd induced_chain(const TabularMdp& mdp, const StationaryPolicy& pi);

/// Left fixed point of the induced chain. Dense solve with a rank check for
/// up to 200 states, power iteration beyond. Throws NonUnichain.
Vec stationary_distribution(const TabularMdp& mdp, const StationaryPolicy& pi);
Vec stationary_distribution(const Eigen::MatrixXd& chain);

/// Solves the Poisson equations for r and r^2 with E_nu[V] = 0.
/// Throws NonUnichain or SingularSolve.
ExactEvaluation exact_evaluation(const TabularMdp& mdp, const StationaryPolicy& pi);

/// Gain and differential values of an arbitrary per-(s, a) signal g.
struct DifferentialValues {
    double gain = 0.0;
    Table q;
    Vec v;
    Vec nu;
};
DifferentialValues differential_values(const TabularMdp& mdp, const StationaryPolicy& pi, const Table& g);

/// Largest absolute residual of the Poisson/Bellman equations and of the
/// stationarity condition; used by the invariant checks.
double poisson_residual(const TabularMdp& mdp, const StationaryPolicy& pi, const ExactEvaluation& ev);

/// Single rollout of length T following `pi`, started from a uniform state
/// and run for `burn_in` unrecorded steps. `reference` (uniform if absent)
/// supplies the a_ref field.
Trajectory sample_trajectory(const TabularMdp& mdp, const StationaryPolicy& pi, std::size_t T, std::uint64_t seed,
                             std::size_t burn_in = 1000, const StationaryPolicy* reference = nullptr);

RhoEta estimate_rho_eta(const Trajectory& traj);

/// Long-run variance eta - rho^2.
inline double long_run_variance(double rho, double eta) { return eta - rho * rho; }

} // namespace varac
