#include "varac/driver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "varac/errors.hpp"

namespace varac {

const char* const kMetricsHeader =
    "k,lambda,y,rho_hat,eta_hat,var_hat,lagrangian,exact_rho,exact_eta,exact_var,bellman_q_mse,bellman_w_mse,gap,"
    "kl_to_opt,wall_time_ms";

Schedule schedules(std::size_t k, std::size_t K, double beta, double gamma) {
    if (k >= K) throw Error("schedules: k must be below K");
    if (!(beta > 0.0) || !(gamma > 0.0)) throw Error("schedules: beta and gamma must be positive");
    const double root = std::sqrt(static_cast<double>(K));
    return {beta * root / static_cast<double>(k + 1), beta * root, gamma * root};
}

double bellman_mse(const TabularMdp& mdp, const StationaryPolicy& pi, const Table& estimate, bool squared_reward) {
    const auto ev = exact_evaluation(mdp, pi);
    const Table g = squared_reward ? Table(mdp.rewards().array().square()) : mdp.rewards();
    const double z = squared_reward ? ev.eta : ev.rho;
    const Vec next_v = (pi.probs().array() * estimate.array()).rowwise().sum();
    const Eigen::Index A = estimate.cols();
    double total = 0.0;
    for (Eigen::Index s = 0; s < estimate.rows(); ++s) {
        for (Eigen::Index a = 0; a < A; ++a) {
            const double target = g(s, a) - z + mdp.transition().row(s * A + a).dot(next_v);
            const double d = estimate(s, a) - target;
            total += ev.sigma(s, a) * d * d;
        }
    }
    return total;
}

double kl_to_reference(const TabularMdp& mdp, const StationaryPolicy& ref, const StationaryPolicy& pi) {
    const Vec nu = stationary_distribution(mdp, ref);
    double total = 0.0;
    for (Eigen::Index s = 0; s < nu.size(); ++s) {
        if (nu(s) <= 0.0) continue;
        total += nu(s) * kl(ref.probs().row(s).transpose(), pi.probs().row(s).transpose());
    }
    return total;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t k) {
    return splitmix64(splitmix64(seed ^ splitmix64(tag)) + k);
}

enum Stream : std::uint64_t { kActorInit = 1, kCriticQInit = 2, kCriticWInit = 3, kSamples = 4 };

FunctionModel initial_model(const TabularMdp& mdp, FunctionClass fc, const NetSpec& spec, std::uint64_t seed,
                            bool subtract_anchor) {
    if (fc == FunctionClass::tabular) return FunctionModel::tabular(mdp.n_states(), mdp.n_actions());
    return FunctionModel::network(mdp.n_states(), mdp.n_actions(),
                                  init_net(mdp.embed_dim(), spec.width, spec.depth, spec.radius, seed), subtract_anchor);
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

RunResult varac_run(const TabularMdp& mdp, const LearnerConfig& cfg, const SaddleSolution* oracle) {
    cfg.validate();
    const auto run_start = std::chrono::steady_clock::now();
    const std::size_t S = mdp.n_states();
    const std::size_t A = mdp.n_actions();
    const double M = mdp.reward_bound();

    // f_theta0 = 0 through anchor subtraction; critics restart from their
    // own fixed initializations at every outer iteration.
    const FunctionModel actor0 =
        initial_model(mdp, cfg.actor_class, cfg.actor_net, derive_seed(cfg.seed, kActorInit, 0), true);
    const FunctionModel q0 =
        initial_model(mdp, cfg.critic_class, cfg.critic_q_net, derive_seed(cfg.seed, kCriticQInit, 0), false);
    const FunctionModel w0 =
        initial_model(mdp, cfg.critic_class, cfg.critic_w_net, derive_seed(cfg.seed, kCriticWInit, 0), false);
    const StationaryPolicy pi_0 = StationaryPolicy::uniform(S, A);

    InnerLoopOptions critic_opts{cfg.critic_step(), cfg.debug_invariants, 1000};
    InnerLoopOptions actor_opts{cfg.actor_step(), cfg.debug_invariants, 1000};

    EnergyPolicy policy(actor0, 1.0);
    StationaryPolicy pi = policy.stationary();
    Trajectory traj = sample_trajectory(mdp, pi, cfg.T, derive_seed(cfg.seed, kSamples, 0), cfg.burn_in, &pi_0);
    RhoEta est = estimate_rho_eta(traj);
    double lambda = 0.0;
    double y = update_y(est.rho_bar);

    RunResult res{SaddleIterate{0, lambda, y, policy, std::nullopt, std::nullopt, {}}, {}, 0, 0, 0.0};
    res.metrics.reserve(cfg.K);

    for (std::size_t k = 0; k < cfg.K; ++k) {
        const auto iter_start = std::chrono::steady_clock::now();
        const Schedule sched = schedules(k, cfg.K, cfg.beta, cfg.gamma);

        auto fit_q = td_policy_evaluation(ValueKind::reward, traj, est.rho_bar, q0, critic_opts);
        auto fit_w = td_policy_evaluation(ValueKind::squared_reward, traj, est.eta_bar, w0, critic_opts);
        const Table q_hat = fit_q.averaged.table();
        const Table w_hat = fit_w.averaged.table();

        IterationMetrics m;
        m.k = k;
        m.lambda_bar = lambda;
        m.y_bar = y;
        m.rho_hat = est.rho_bar;
        m.eta_hat = est.eta_bar;
        m.var_hat = long_run_variance(est.rho_bar, est.eta_bar);
        m.lagrangian_value = lagrangian(lambda, est.rho_bar, est.eta_bar, y, cfg.alpha);
        if (cfg.exact_metrics) {
            const auto ev = exact_evaluation(mdp, pi);
            m.exact_rho = ev.rho;
            m.exact_eta = ev.eta;
            m.exact_var = ev.variance;
            m.lagrangian_value = lagrangian(lambda, ev.rho, ev.eta, y, cfg.alpha);
            m.bellman_q_mse = bellman_mse(mdp, pi, q_hat, false);
            m.bellman_w_mse = bellman_mse(mdp, pi, w_hat, true);
            m.c_k = std::abs(ev.rho - est.rho_bar);
            m.d_k = std::abs(ev.eta - est.eta_bar);
            if (oracle) m.kl_to_opt = kl_to_reference(mdp, oracle->pi_star, pi);
        }
        if (oracle) m.gap = oracle->value - m.lagrangian_value;

        // Dual step, then the actor with the pre-update multiplier.
        const double lambda_next = update_lambda(lambda, y, est.rho_bar, est.eta_bar, cfg.alpha, sched.gamma_k, cfg.N);
        const ImprovementTerms terms{lambda, y, sched.beta_k, policy.temperature()};
        const Table targets = actor_targets(q_hat, w_hat, policy.energies(), terms, sched.tau_next);
        auto fit_f = actor_sgd(traj, targets, actor0, actor_opts);

        res.ball_checks += fit_q.ball_checks + fit_w.ball_checks + fit_f.ball_checks;
        res.ball_violations += fit_q.ball_violations + fit_w.ball_violations + fit_f.ball_violations;

        policy = EnergyPolicy(std::move(fit_f.averaged), sched.tau_next);
        pi = policy.stationary();
        traj = sample_trajectory(mdp, pi, cfg.T, derive_seed(cfg.seed, kSamples, k + 1), cfg.burn_in, &pi_0);
        est = estimate_rho_eta(traj);
        lambda = lambda_next;
        y = update_y(est.rho_bar);

        if (cfg.debug_invariants) {
            if (!(lambda >= 0.0 && lambda <= cfg.N)) throw InvariantViolation("lambda left [0, N]");
            if (!(std::abs(y) <= M + 1e-12)) throw InvariantViolation("|y| exceeds the reward bound");
        }

        res.final_iterate = SaddleIterate{k + 1, lambda, y, policy, std::move(fit_q.averaged), std::move(fit_w.averaged),
                                          sched};
        m.wall_time_ms = ms_since(iter_start);
        res.metrics.push_back(m);
    }
    res.wall_time_ms = ms_since(run_start);
    return res;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw Error("metrics line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

} // namespace

std::string metrics_to_csv(const std::vector<IterationMetrics>& rows) {
    std::string out = kMetricsHeader;
    out += '\n';
    for (const auto& m : rows) {
        out += std::to_string(m.k);
        for (const std::string& f :
             {fmt(m.lambda_bar), fmt(m.y_bar), fmt(m.rho_hat), fmt(m.eta_hat), fmt(m.var_hat), fmt(m.lagrangian_value),
              fmt(m.exact_rho), fmt(m.exact_eta), fmt(m.exact_var), fmt(m.bellman_q_mse), fmt(m.bellman_w_mse),
              fmt(m.gap), fmt(m.kl_to_opt), fmt(m.wall_time_ms)}) {
            out += ',';
            out += f;
        }
        out += '\n';
    }
    return out;
}

std::vector<IterationMetrics> metrics_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) throw Error("metrics: unexpected header");
    std::vector<IterationMetrics> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 15) throw Error("metrics line " + std::to_string(lineno) + ": expected 15 fields");
        auto req = [&](std::size_t i) { return parse_double(f[i], lineno); };
        auto opt = [&](std::size_t i) -> std::optional<double> {
            if (f[i].empty()) return std::nullopt;
            return parse_double(f[i], lineno);
        };
        IterationMetrics m;
        const double k = req(0);
        if (k < 0 || k != std::floor(k)) throw Error("metrics line " + std::to_string(lineno) + ": bad k");
        m.k = static_cast<std::size_t>(k);
        m.lambda_bar = req(1);
        m.y_bar = req(2);
        m.rho_hat = req(3);
        m.eta_hat = req(4);
        m.var_hat = req(5);
        m.lagrangian_value = req(6);
        m.exact_rho = opt(7);
        m.exact_eta = opt(8);
        m.exact_var = opt(9);
        m.bellman_q_mse = opt(10);
        m.bellman_w_mse = opt(11);
        m.gap = opt(12);
        m.kl_to_opt = opt(13);
        m.wall_time_ms = req(14);
        rows.push_back(m);
    }
    return rows;
}

std::string run_summary_json(const TabularMdp& mdp, const LearnerConfig& cfg, const RunResult& res,
                             const SaddleSolution* oracle) {
    using nlohmann::json;
    auto net = [](const NetSpec& n) { return json{{"m", n.width}, {"H", n.depth}, {"R", n.radius}}; };
    json config = {{"K", cfg.K},
                   {"T", cfg.T},
                   {"beta", cfg.beta},
                   {"gamma", cfg.gamma},
                   {"N", cfg.N},
                   {"alpha", cfg.alpha},
                   {"zeta", cfg.actor_step()},
                   {"delta", cfg.critic_step()},
                   {"actor", to_string(cfg.actor_class)},
                   {"critic", to_string(cfg.critic_class)},
                   {"actor_net", net(cfg.actor_net)},
                   {"critic_q_net", net(cfg.critic_q_net)},
                   {"critic_w_net", net(cfg.critic_w_net)},
                   {"burn_in", cfg.burn_in},
                   {"exact_metrics", cfg.exact_metrics}};

    const auto& it = res.final_iterate;
    const StationaryPolicy pi = it.actor.stationary();
    json fin = {{"k", it.k},
                {"lambda", it.lambda_bar},
                {"y", it.y_bar},
                {"temperature", it.actor.temperature()}};
    bool finite = std::isfinite(it.lambda_bar) && std::isfinite(it.y_bar);
    for (const auto& m : res.metrics) {
        finite = finite && std::isfinite(m.lambda_bar) && std::isfinite(m.rho_hat) && std::isfinite(m.eta_hat) &&
                 std::isfinite(m.lagrangian_value);
    }
    json flags = {{"lambda_in_range", it.lambda_bar >= 0.0 && it.lambda_bar <= cfg.N},
                  {"all_finite", finite},
                  {"zero_ball_violations", res.ball_violations == 0}};
    if (cfg.exact_metrics) {
        const auto ev = exact_evaluation(mdp, pi);
        fin["exact_rho"] = ev.rho;
        fin["exact_eta"] = ev.eta;
        fin["exact_var"] = ev.variance;
        flags["constraint_within_0.05"] = ev.variance <= cfg.alpha + 0.05;
        if (oracle) flags["rho_within_0.05_of_oracle"] = ev.rho >= oracle->rho_star - 0.05;
        double c = 0.0;
        double d = 0.0;
        for (const auto& m : res.metrics) {
            c += m.c_k.value_or(0.0);
            d += m.d_k.value_or(0.0);
        }
        const double n = static_cast<double>(std::max<std::size_t>(1, res.metrics.size()));
        fin["mean_c_k"] = c / n;
        fin["mean_d_k"] = d / n;
    }
    if (oracle) {
        double gap = 0.0;
        for (const auto& m : res.metrics) gap += std::abs(m.gap.value_or(0.0));
        fin["mean_abs_gap"] = gap / static_cast<double>(std::max<std::size_t>(1, res.metrics.size()));
        fin["oracle_value"] = oracle->value;
    }
    json doc = {{"seed", cfg.seed},
                {"config", config},
                {"final", fin},
                {"ball_checks", res.ball_checks},
                {"ball_violations", res.ball_violations},
                {"wall_time_ms", res.wall_time_ms},
                {"flags", flags}};
    return doc.dump(2) + "\n";
}

} // namespace varac
