#include "varac/mdp.hpp"

#include <cmath>
#include <sstream>

#include "varac/errors.hpp"

namespace varac {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr std::size_t kDenseLimit = 200;

std::string at(std::size_t s, std::size_t a) {
    std::ostringstream os;
    os << "[" << s << "][" << a << "]";
    return os.str();
}

} // namespace

TabularMdp::TabularMdp(Eigen::MatrixXd transition, Table reward)
    : transition_(std::move(transition)), reward_(std::move(reward)) {
    const auto S = reward_.rows();
    const auto A = reward_.cols();
    if (S < 1) throw InvalidMdp("n_states: must be positive");
    if (A < 1) throw InvalidMdp("n_actions: must be positive");
    if (transition_.rows() != S * A || transition_.cols() != S) {
        std::ostringstream os;
        os << "transition: expected shape [" << S << "][" << A << "][" << S << "]";
        throw InvalidMdp(os.str());
    }
    for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index a = 0; a < A; ++a) {
            const auto row = transition_.row(s * A + a);
            double total = 0.0;
            for (Eigen::Index t = 0; t < S; ++t) {
                const double p = row(t);
                if (!std::isfinite(p) || p < 0.0) {
                    throw InvalidMdp("transition" + at(s, a) + "[" + std::to_string(t) +
                                     "]: probability must be finite and non-negative");
                }
                total += p;
            }
            if (std::abs(total - 1.0) > kStochasticTol) {
                std::ostringstream os;
                os.precision(17);
                os << "transition" << at(s, a) << ": row sums to " << total << ", expected 1";
                throw InvalidMdp(os.str());
            }
            const double r = reward_(s, a);
            if (!std::isfinite(r)) throw InvalidMdp("reward" + at(s, a) + ": must be finite");
            reward_bound_ = std::max(reward_bound_, std::abs(r));
        }
    }
}

StationaryPolicy::StationaryPolicy(Table probs) : probs_(std::move(probs)) {
    if (probs_.rows() < 1 || probs_.cols() < 1) throw DimensionMismatch("policy table must be non-empty");
    for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
        if ((probs_.row(s).array() < 0.0).any() || !probs_.row(s).allFinite()) {
            throw Error("policy row " + std::to_string(s) + " has a negative or non-finite entry");
        }
        if (std::abs(probs_.row(s).sum() - 1.0) > kStochasticTol) {
            throw Error("policy row " + std::to_string(s) + " does not sum to 1");
        }
    }
}

StationaryPolicy StationaryPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
    return StationaryPolicy(Table::Constant(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions),
                                            1.0 / static_cast<double>(n_actions)));
}

StationaryPolicy StationaryPolicy::deterministic(const std::vector<std::size_t>& actions, std::size_t n_actions) {
    Table t = Table::Zero(static_cast<Eigen::Index>(actions.size()), static_cast<Eigen::Index>(n_actions));
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] >= n_actions) throw IndexOutOfRange("deterministic policy action out of range");
        t(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(actions[s])) = 1.0;
    }
    return StationaryPolicy(std::move(t));
}

Eigen::MatrixXd induced_chain(const TabularMdp& mdp, const StationaryPolicy& pi) {
    const auto S = static_cast<Eigen::Index>(mdp.n_states());
    const auto A = static_cast<Eigen::Index>(mdp.n_actions());
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions()) {
        throw DimensionMismatch("policy shape does not match the MDP");
    }
    Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(S, S);
    for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index a = 0; a < A; ++a) {
            const double w = pi.probs()(s, a);
            if (w != 0.0) chain.row(s) += w * mdp.transition().row(s * A + a);
        }
    }
    return chain;
}

Vec stationary_distribution(const Eigen::MatrixXd& chain) {
    const Eigen::Index n = chain.rows();
    Vec nu;
    if (static_cast<std::size_t>(n) <= kDenseLimit) {
        const Eigen::MatrixXd gen = Eigen::MatrixXd::Identity(n, n) - chain;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gen);
        lu.setThreshold(1e-10);
        if (lu.rank() < n - 1) {
            throw NonUnichain("induced chain has " + std::to_string(n - lu.rank()) +
                              " recurrent classes (null space dimension > 1)");
        }
        Eigen::MatrixXd sys(n + 1, n);
        sys.topRows(n) = gen.transpose();
        sys.row(n).setOnes();
        Vec rhs = Vec::Zero(n + 1);
        rhs(n) = 1.0;
        nu = sys.colPivHouseholderQr().solve(rhs);
    } else {
        nu = Vec::Constant(n, 1.0 / static_cast<double>(n));
        const Eigen::MatrixXd chain_t = chain.transpose();
        bool converged = false;
        for (int it = 0; it < 1'000'000; ++it) {
            // Lazy step: identical fixed point, immune to periodicity.
            Vec next = 0.5 * (nu + chain_t * nu);
            const double change = (next - nu).lpNorm<1>();
            nu = std::move(next);
            if (change < 1e-13) {
                converged = true;
                break;
            }
        }
        if (!converged) throw NonUnichain("power iteration did not converge");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (nu(i) < 0.0) {
            if (nu(i) < -1e-9) throw NonUnichain("stationary solve produced a negative mass");
            nu(i) = 0.0;
        }
    }
    nu /= nu.sum();
    return nu;
}

Vec stationary_distribution(const TabularMdp& mdp, const StationaryPolicy& pi) {
    return stationary_distribution(induced_chain(mdp, pi));
}

namespace {

struct PoissonSolution {
    double gain = 0.0;
    Table q;
    Vec v;
};

PoissonSolution solve_poisson(const TabularMdp& mdp, const StationaryPolicy& pi, const Eigen::MatrixXd& chain,
                              const Vec& nu, const Table& g) {
    const auto S = static_cast<Eigen::Index>(mdp.n_states());
    const auto A = static_cast<Eigen::Index>(mdp.n_actions());
    const Vec g_pi = (pi.probs().array() * g.array()).rowwise().sum();
    PoissonSolution out;
    out.gain = nu.dot(g_pi);

    Eigen::MatrixXd sys(S + 1, S);
    sys.topRows(S) = Eigen::MatrixXd::Identity(S, S) - chain;
    sys.row(S) = nu.transpose();
    Vec rhs(S + 1);
    rhs.head(S) = g_pi.array() - out.gain;
    rhs(S) = 0.0;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys);
    qr.setThreshold(1e-11);
    if (qr.rank() < S) throw SingularSolve("Poisson system is rank deficient");
    out.v = qr.solve(rhs);

    const Vec next_v = mdp.transition() * out.v;  // (S*A)
    out.q.resize(S, A);
    for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index a = 0; a < A; ++a) out.q(s, a) = g(s, a) - out.gain + next_v(s * A + a);
    }
    return out;
}

} // namespace

ExactEvaluation exact_evaluation(const TabularMdp& mdp, const StationaryPolicy& pi) {
    const Eigen::MatrixXd chain = induced_chain(mdp, pi);
    ExactEvaluation ev;
    ev.nu = stationary_distribution(chain);
    ev.sigma = pi.probs().array().colwise() * ev.nu.array();

    const Table r = mdp.rewards();
    const Table r2 = r.array().square();
    auto first = solve_poisson(mdp, pi, chain, ev.nu, r);
    auto second = solve_poisson(mdp, pi, chain, ev.nu, r2);
    ev.rho = first.gain;
    ev.eta = second.gain;
    ev.variance = long_run_variance(ev.rho, ev.eta);
    ev.q = std::move(first.q);
    ev.v = std::move(first.v);
    ev.w = std::move(second.q);
    ev.u = std::move(second.v);
    return ev;
}

DifferentialValues differential_values(const TabularMdp& mdp, const StationaryPolicy& pi, const Table& g) {
    if (g.rows() != static_cast<Eigen::Index>(mdp.n_states()) || g.cols() != static_cast<Eigen::Index>(mdp.n_actions())) {
        throw DimensionMismatch("signal table shape does not match the MDP");
    }
    const Eigen::MatrixXd chain = induced_chain(mdp, pi);
    DifferentialValues out;
    out.nu = stationary_distribution(chain);
    auto sol = solve_poisson(mdp, pi, chain, out.nu, g);
    out.gain = sol.gain;
    out.q = std::move(sol.q);
    out.v = std::move(sol.v);
    return out;
}

double poisson_residual(const TabularMdp& mdp, const StationaryPolicy& pi, const ExactEvaluation& ev) {
    const auto S = static_cast<Eigen::Index>(mdp.n_states());
    const auto A = static_cast<Eigen::Index>(mdp.n_actions());
    const Eigen::MatrixXd chain = induced_chain(mdp, pi);
    double worst = (chain.transpose() * ev.nu - ev.nu).cwiseAbs().maxCoeff();
    worst = std::max(worst, std::abs(ev.nu.sum() - 1.0));
    const Vec pv = mdp.transition() * ev.v;
    const Vec pu = mdp.transition() * ev.u;
    for (Eigen::Index s = 0; s < S; ++s) {
        worst = std::max(worst, std::abs(ev.v(s) - pi.probs().row(s).dot(ev.q.row(s))));
        worst = std::max(worst, std::abs(ev.u(s) - pi.probs().row(s).dot(ev.w.row(s))));
        for (Eigen::Index a = 0; a < A; ++a) {
            const double r = mdp.reward(static_cast<std::size_t>(s), static_cast<std::size_t>(a));
            worst = std::max(worst, std::abs(ev.q(s, a) - (r - ev.rho + pv(s * A + a))));
            worst = std::max(worst, std::abs(ev.w(s, a) - (r * r - ev.eta + pu(s * A + a))));
        }
    }
    return worst;
}

Trajectory sample_trajectory(const TabularMdp& mdp, const StationaryPolicy& pi, std::size_t T, std::uint64_t seed,
                             std::size_t burn_in, const StationaryPolicy* reference) {
    if (T < 1) throw Error("sample_trajectory: T must be at least 1");
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions()) {
        throw DimensionMismatch("policy shape does not match the MDP");
    }
    Rng root(seed);
    Rng dyn = root.split(0);
    Rng ref_rng = root.split(1);
    const std::size_t S = mdp.n_states();
    const std::size_t A = mdp.n_actions();

    auto draw_action = [&](Rng& rng, const StationaryPolicy& p, std::size_t s) {
        return rng.categorical(p.probs().row(static_cast<Eigen::Index>(s)));
    };

    std::size_t s = std::min<std::size_t>(static_cast<std::size_t>(dyn.uniform() * static_cast<double>(S)), S - 1);
    std::size_t a = draw_action(dyn, pi, s);
    for (std::size_t t = 0; t < burn_in; ++t) {
        s = dyn.categorical(mdp.next_dist(s, a));
        a = draw_action(dyn, pi, s);
    }

    Trajectory traj;
    traj.seed = seed;
    traj.steps.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        Transition tr;
        tr.s = static_cast<std::uint32_t>(s);
        tr.a = static_cast<std::uint32_t>(a);
        tr.r = mdp.reward(s, a);
        const std::size_t next_s = dyn.categorical(mdp.next_dist(s, a));
        const std::size_t next_a = draw_action(dyn, pi, next_s);
        tr.next_s = static_cast<std::uint32_t>(next_s);
        tr.next_a = static_cast<std::uint32_t>(next_a);
        if (reference != nullptr) {
            tr.a_ref = static_cast<std::uint32_t>(draw_action(ref_rng, *reference, s));
        } else {
            tr.a_ref = static_cast<std::uint32_t>(
                std::min<std::size_t>(static_cast<std::size_t>(ref_rng.uniform() * static_cast<double>(A)), A - 1));
        }
        traj.steps.push_back(tr);
        s = next_s;
        a = next_a;
    }
    return traj;
}

RhoEta estimate_rho_eta(const Trajectory& traj) {
    if (traj.steps.empty()) throw Error("estimate_rho_eta: empty trajectory");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& tr : traj.steps) {
        sum += tr.r;
        sum_sq += tr.r * tr.r;
    }
    const double n = static_cast<double>(traj.steps.size());
    return {sum / n, sum_sq / n};
}

} // namespace varac
