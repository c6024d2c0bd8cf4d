#include "varac/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "varac/errors.hpp"

namespace varac {

EnvFamily parse_env_family(const std::string& name) {
    if (name == "random") return EnvFamily::random;
    if (name == "portfolio") return EnvFamily::portfolio;
    if (name == "gridworld") return EnvFamily::gridworld;
    throw SpecInvalid("unknown env family '" + name + "'");
}

std::string to_string(EnvFamily f) {
    switch (f) {
    case EnvFamily::random: return "random";
    case EnvFamily::portfolio: return "portfolio";
    case EnvFamily::gridworld: return "gridworld";
    }
    return "?";
}

namespace {

void mix_uniform(Eigen::MatrixXd& P, double mix) {
    const double u = 1.0 / static_cast<double>(P.cols());
    P = (1.0 - mix) * P.array() + mix * u;
}

TabularMdp random_mdp(const EnvSpec& spec) {
    const auto S = static_cast<Eigen::Index>(spec.n_states);
    const auto A = static_cast<Eigen::Index>(spec.n_actions);
    Rng dyn(Rng(spec.seed).split(0));
    Rng rew(Rng(spec.seed).split(1));
    std::exponential_distribution<double> expo(1.0);
    Eigen::MatrixXd P(S * A, S);
    for (Eigen::Index i = 0; i < S * A; ++i) {
        for (Eigen::Index j = 0; j < S; ++j) P(i, j) = expo(dyn);
        P.row(i) /= P.row(i).sum();
    }
    mix_uniform(P, spec.mix);
    Table r(S, A);
    for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index a = 0; a < A; ++a) r(s, a) = (2.0 * rew.uniform() - 1.0) * spec.reward_scale;
    }
    return TabularMdp(std::move(P), std::move(r));
}

TabularMdp portfolio_mdp(const EnvSpec& spec) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(6, 3);
    Table r(3, 2);
    for (Eigen::Index s = 0; s < 3; ++s) {
        P(s * 2 + 0, 0) = 1.0;
        P(s * 2 + 1, 1) = 0.5;
        P(s * 2 + 1, 2) = 0.5;
    }
    r.row(0).setConstant(spec.safe_return);
    r.row(1).setConstant(spec.risky_high);
    r.row(2).setConstant(spec.risky_low);
    return TabularMdp(std::move(P), std::move(r));
}

// 3 rows; start at bottom-left, goal at bottom-right, cliff in between.
TabularMdp gridworld_mdp(const EnvSpec& spec) {
    const std::size_t rows = 3;
    const std::size_t cols = spec.n_states / rows;
    const std::size_t S = rows * cols;
    const std::size_t A = 4;
    const double slip = 0.1;
    auto id = [&](std::size_t row, std::size_t col) { return row * cols + col; };
    const std::size_t start = id(rows - 1, 0);
    const std::size_t goal = id(rows - 1, cols - 1);
    auto is_cliff = [&](std::size_t s) { return s / cols == rows - 1 && s % cols > 0 && s % cols + 1 < cols; };
    auto move = [&](std::size_t s, std::size_t a) {
        std::size_t row = s / cols;
        std::size_t col = s % cols;
        switch (a) {
        case 0: row = row > 0 ? row - 1 : row; break;         // up
        case 1: col = col + 1 < cols ? col + 1 : col; break;  // right
        case 2: row = row + 1 < rows ? row + 1 : row; break;  // down
        default: col = col > 0 ? col - 1 : col; break;        // left
        }
        return id(row, col);
    };

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S * A), static_cast<Eigen::Index>(S));
    Table r = Table::Constant(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(A), -0.05 * spec.reward_scale);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            const auto row = static_cast<Eigen::Index>(s * A + a);
            if (s == goal || is_cliff(s)) {
                // Terminal cells pay out and send the agent back to the start.
                P(row, static_cast<Eigen::Index>(start)) = 1.0;
                r(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = (s == goal ? 1.0 : -1.0) * spec.reward_scale;
                continue;
            }
            for (std::size_t b = 0; b < A; ++b) {
                const double pb = b == a ? 1.0 - slip : slip / 3.0;
                P(row, static_cast<Eigen::Index>(move(s, b))) += pb;
            }
        }
    }
    mix_uniform(P, spec.mix);
    return TabularMdp(std::move(P), std::move(r));
}

} // namespace

TabularMdp generate(const EnvSpec& spec) {
    if (!(spec.reward_scale > 0.0) || !std::isfinite(spec.reward_scale)) throw SpecInvalid("reward_scale must be positive");
    switch (spec.family) {
    case EnvFamily::random: {
        if (spec.n_states < 1 || spec.n_actions < 1) throw SpecInvalid("random env needs at least one state and action");
        if (!(spec.mix > 0.0 && spec.mix <= 1.0)) throw SpecInvalid("mix must lie in (0, 1]");
        auto mdp = random_mdp(spec);
        if (!is_ergodic(induced_chain(mdp, StationaryPolicy::uniform(spec.n_states, spec.n_actions)))) {
            throw SpecInvalid("generated chain is not ergodic");
        }
        return mdp;
    }
    case EnvFamily::portfolio: {
        const double vals[] = {spec.safe_return, spec.risky_low, spec.risky_high};
        for (double v : vals) {
            if (!std::isfinite(v) || std::abs(v) > 1.0) throw SpecInvalid("portfolio returns must lie in [-1, 1]");
        }
        if (spec.risky_low > spec.risky_high) throw SpecInvalid("risky_low exceeds risky_high");
        return portfolio_mdp(spec);
    }
    case EnvFamily::gridworld: {
        if (spec.n_states < 6 || spec.n_states % 3 != 0) throw SpecInvalid("gridworld needs n_states = 3 * cols with cols >= 2");
        if (!(spec.mix > 0.0 && spec.mix <= 1.0)) throw SpecInvalid("mix must lie in (0, 1]");
        if (spec.reward_scale > 1.0) throw SpecInvalid("gridworld reward_scale must not exceed 1");
        return gridworld_mdp(spec);
    }
    }
    throw SpecInvalid("unknown env family");
}

bool is_ergodic(const Eigen::MatrixXd& chain) {
    const auto n = chain.rows();
    // Reachability from state 0 forwards and backwards.
    auto reach = [&](bool transpose) {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<Eigen::Index> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const auto i = stack.back();
            stack.pop_back();
            for (Eigen::Index j = 0; j < n; ++j) {
                const double p = transpose ? chain(j, i) : chain(i, j);
                if (p > 0.0 && !seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = 1;
                    stack.push_back(j);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    if (!reach(false) || !reach(true)) return false;
    // Irreducible: aperiodic iff gcd of return-time lengths through state 0
    // is 1; BFS levels give the period.
    std::vector<long> level(static_cast<std::size_t>(n), -1);
    std::vector<Eigen::Index> queue{0};
    level[0] = 0;
    long period = 0;
    for (std::size_t h = 0; h < queue.size(); ++h) {
        const auto i = queue[h];
        for (Eigen::Index j = 0; j < n; ++j) {
            if (chain(i, j) <= 0.0) continue;
            auto& lj = level[static_cast<std::size_t>(j)];
            if (lj < 0) {
                lj = level[static_cast<std::size_t>(i)] + 1;
                queue.push_back(j);
            } else {
                period = std::gcd(period, level[static_cast<std::size_t>(i)] + 1 - lj);
            }
        }
    }
    return period == 1;
}

double second_eigenvalue_modulus(const Eigen::MatrixXd& chain) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(chain, false);
    std::vector<double> mods;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mods.push_back(std::abs(es.eigenvalues()(i)));
    std::sort(mods.begin(), mods.end(), std::greater<>());
    return mods.size() > 1 ? mods[1] : 0.0;
}

} // namespace varac
