#include "varac/learner.hpp"

#include <algorithm>
#include <cmath>

#include "varac/errors.hpp"

namespace varac {

double LearnerConfig::actor_step() const { return zeta.value_or(1.0 / std::sqrt(static_cast<double>(T))); }
double LearnerConfig::critic_step() const { return delta.value_or(1.0 / std::sqrt(static_cast<double>(T))); }

void LearnerConfig::validate() const {
    auto positive = [](double v, const char* key) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key, "must be a positive number");
    };
    if (K < 1) throw ConfigError("learner.K", "must be at least 1");
    if (T < 1) throw ConfigError("learner.T", "must be at least 1");
    positive(beta, "learner.beta");
    positive(gamma, "learner.gamma");
    positive(N, "learner.N");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("learner.alpha", "must be non-negative");
    if (zeta) positive(*zeta, "learner.zeta");
    if (delta) positive(*delta, "learner.delta");
    auto net = [&](const NetSpec& n, const std::string& prefix) {
        if (n.width < 1) throw ConfigError(prefix + ".m", "must be at least 1");
        if (n.depth < 1) throw ConfigError(prefix + ".H", "must be at least 1");
        if (!(n.radius >= 0.0)) throw ConfigError(prefix + ".R", "must be non-negative");
    };
    net(actor_net, "learner.actor_net");
    net(critic_q_net, "learner.critic_q_net");
    net(critic_w_net, "learner.critic_w_net");
}

namespace {

// Running means of the squared residual over the first and last tenth.
class LossWindow {
public:
    explicit LossWindow(std::size_t T) : T_(T), span_(std::max<std::size_t>(1, T / 10)) {}
    void add(std::size_t t, double loss) {
        if (t < span_) head_ += loss;
        if (t + span_ >= T_) tail_ += loss;
    }
    double head() const { return head_ / static_cast<double>(std::min(span_, T_)); }
    double tail() const { return tail_ / static_cast<double>(std::min(span_, T_)); }

private:
    std::size_t T_;
    std::size_t span_;
    double head_ = 0.0;
    double tail_ = 0.0;
};

void check_ball(const FunctionModel& model, std::size_t t, std::size_t T, const InnerLoopOptions& opts,
                InnerLoopResult& res) {
    const bool due = opts.check_every_step || (t + 1) % std::max<std::size_t>(1, opts.check_interval) == 0 || t + 1 == T;
    if (!due) return;
    ++res.ball_checks;
    if (!model.in_ball()) {
        ++res.ball_violations;
        if (opts.check_every_step) {
            throw InvariantViolation("iterate left its projection ball at inner step " + std::to_string(t));
        }
    }
}

} // namespace

InnerLoopResult td_policy_evaluation(ValueKind kind, const Trajectory& samples, double z_bar, FunctionModel model0,
                                     const InnerLoopOptions& opts) {
    const std::size_t T = samples.steps.size();
    if (T == 0) throw Error("td_policy_evaluation: no samples");
    if (!(opts.stepsize > 0.0)) throw Error("td_policy_evaluation: stepsize must be positive");
    FunctionModel model = std::move(model0);
    FunctionModel::Averager avg(model);
    InnerLoopResult res{model, 0, 0, 0.0, 0.0};
    LossWindow window(T);
    NetWorkspace ws;
    NetWorkspace ws_next;
    for (std::size_t t = 0; t < T; ++t) {
        avg.add(model);
        const Transition& tr = samples.steps[t];
        const double g = kind == ValueKind::reward ? tr.r : tr.r * tr.r;
        const double next = model.value(tr.next_s, tr.next_a, ws_next);
        const double cur = model.value(tr.s, tr.a, ws);
        const double err = cur - g + z_bar - next;
        window.add(t, err * err);
        // Semi-gradient: only the (s, a) estimate is differentiated.
        model.step(tr.s, tr.a, -opts.stepsize * err, ws, true);
        model.project();
        check_ball(model, t, T, opts, res);
    }
    res.averaged = avg.mean();
    res.loss_head = window.head();
    res.loss_tail = window.tail();
    return res;
}

InnerLoopResult td_policy_evaluation(ValueKind kind, const TabularMdp& mdp, const StationaryPolicy& pi, double z_bar,
                                     FunctionModel model0, std::size_t T, std::uint64_t seed,
                                     const InnerLoopOptions& opts, std::size_t burn_in) {
    const Trajectory traj = sample_trajectory(mdp, pi, T, seed, burn_in);
    return td_policy_evaluation(kind, traj, z_bar, std::move(model0), opts);
}

Table actor_targets(const Table& q_est, const Table& w_est, const Table& f_prev, const ImprovementTerms& terms,
                    double tau_k1) {
    if (q_est.rows() != w_est.rows() || q_est.rows() != f_prev.rows() || q_est.cols() != w_est.cols() ||
        q_est.cols() != f_prev.cols()) {
        throw DimensionMismatch("actor_targets: table shapes differ");
    }
    Table out(q_est.rows(), q_est.cols());
    for (Eigen::Index s = 0; s < q_est.rows(); ++s) {
        for (Eigen::Index a = 0; a < q_est.cols(); ++a) {
            out(s, a) = regression_target(q_est(s, a), w_est(s, a), f_prev(s, a), terms, tau_k1);
        }
    }
    return out;
}

InnerLoopResult actor_sgd(const Trajectory& samples, const Table& targets, FunctionModel model0,
                          const InnerLoopOptions& opts) {
    const std::size_t T = samples.steps.size();
    if (T == 0) throw Error("actor_sgd: no samples");
    if (!(opts.stepsize > 0.0)) throw Error("actor_sgd: stepsize must be positive");
    FunctionModel model = std::move(model0);
    FunctionModel::Averager avg(model);
    InnerLoopResult res{model, 0, 0, 0.0, 0.0};
    LossWindow window(T);
    NetWorkspace ws;
    for (std::size_t t = 0; t < T; ++t) {
        avg.add(model);
        const Transition& tr = samples.steps[t];
        const double err =
            model.value(tr.s, tr.a_ref, ws) - targets(static_cast<Eigen::Index>(tr.s), static_cast<Eigen::Index>(tr.a_ref));
        window.add(t, err * err);
        model.step(tr.s, tr.a_ref, -opts.stepsize * err, ws, true);
        model.project();
        check_ball(model, t, T, opts, res);
    }
    res.averaged = avg.mean();
    res.loss_head = window.head();
    res.loss_tail = window.tail();
    return res;
}

double update_lambda(double lambda_bar, double y_bar, double rho_bar, double eta_bar, double alpha, double gamma_k,
                     double N) {
    if (!(gamma_k > 0.0) || !(N > 0.0)) throw Error("update_lambda: gamma_k and N must be positive");
    const double slope = alpha + 2.0 * y_bar * rho_bar - eta_bar - y_bar * y_bar;
    return std::clamp(lambda_bar - slope / (2.0 * gamma_k), 0.0, N);
}

} // namespace varac
