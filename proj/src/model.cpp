#include "varac/model.hpp"

#include <cmath>

#include "varac/errors.hpp"

namespace varac {

FunctionClass parse_function_class(const std::string& name) {
    if (name == "tabular") return FunctionClass::tabular;
    if (name == "dnn") return FunctionClass::dnn;
    throw Error("unknown function class '" + name + "' (expected tabular or dnn)");
}

std::string to_string(FunctionClass fc) { return fc == FunctionClass::tabular ? "tabular" : "dnn"; }

FunctionModel::FunctionModel(std::size_t n_states, std::size_t n_actions, std::variant<TabularParams, DeepNet> params,
                             bool subtract_anchor)
    : n_states_(n_states), n_actions_(n_actions), params_(std::move(params)), subtract_anchor_(subtract_anchor) {}

FunctionModel FunctionModel::tabular(std::size_t n_states, std::size_t n_actions, double radius) {
    TabularParams p;
    p.values = Table::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
    p.anchor = p.values;
    p.radius = radius;
    return FunctionModel(n_states, n_actions, std::move(p), false);
}

FunctionModel FunctionModel::network(std::size_t n_states, std::size_t n_actions, DeepNet net, bool subtract_anchor) {
    if (net.input_dim() != n_states * n_actions) {
        throw DimensionMismatch("network input dimension must equal n_states * n_actions");
    }
    FunctionModel m(n_states, n_actions, std::move(net), subtract_anchor);
    if (subtract_anchor) {
        const DeepNet& live = std::get<DeepNet>(m.params_);
        DeepNet at_anchor(live.anchor(), live.anchor(), live.output_signs(), live.radius());
        NetWorkspace ws;
        m.anchor_values_.resize(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
        for (std::size_t s = 0; s < n_states; ++s) {
            for (std::size_t a = 0; a < n_actions; ++a) {
                m.anchor_values_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
                    forward(at_anchor, m.embedding(s, a), ws);
            }
        }
    }
    return m;
}

Eigen::VectorXd FunctionModel::embedding(std::size_t s, std::size_t a) const {
    return embed(n_states_, n_actions_, s, a);
}

double FunctionModel::value(std::size_t s, std::size_t a) const {
    NetWorkspace ws;
    return value(s, a, ws);
}

double FunctionModel::value(std::size_t s, std::size_t a, NetWorkspace& ws) const {
    if (s >= n_states_ || a >= n_actions_) throw IndexOutOfRange("model index out of range");
    const auto si = static_cast<Eigen::Index>(s);
    const auto ai = static_cast<Eigen::Index>(a);
    if (const auto* t = std::get_if<TabularParams>(&params_)) return t->values(si, ai);
    const double out = forward(std::get<DeepNet>(params_), embedding(s, a), ws);
    return subtract_anchor_ ? out - anchor_values_(si, ai) : out;
}

Table FunctionModel::table() const {
    if (const auto* t = std::get_if<TabularParams>(&params_)) return t->values;
    Table out(static_cast<Eigen::Index>(n_states_), static_cast<Eigen::Index>(n_actions_));
    NetWorkspace ws;
    for (std::size_t s = 0; s < n_states_; ++s) {
        for (std::size_t a = 0; a < n_actions_; ++a) {
            out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = value(s, a, ws);
        }
    }
    return out;
}

void FunctionModel::step(std::size_t s, std::size_t a, double coeff, NetWorkspace& ws, bool forward_done) {
    if (auto* t = std::get_if<TabularParams>(&params_)) {
        t->values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) += coeff;
        return;
    }
    apply_gradient_step(std::get<DeepNet>(params_), embedding(s, a), coeff, ws, forward_done);
}

void FunctionModel::project() {
    if (auto* t = std::get_if<TabularParams>(&params_)) {
        if (std::isinf(t->radius)) return;
        const double dist = (t->values - t->anchor).norm();
        if (dist > t->radius) t->values = t->anchor + (t->radius / dist) * (t->values - t->anchor);
        return;
    }
    project_in_place(std::get<DeepNet>(params_));
}

bool FunctionModel::in_ball(double tol) const {
    if (const auto* t = std::get_if<TabularParams>(&params_)) {
        return std::isinf(t->radius) || (t->values - t->anchor).norm() <= t->radius * (1.0 + tol) + tol;
    }
    return std::get<DeepNet>(params_).in_ball(tol);
}

FunctionModel::Averager::Averager(const FunctionModel& like) : prototype_(like) {
    if (const auto* t = like.as_table()) {
        sums_.push_back(Eigen::MatrixXd::Zero(t->values.rows(), t->values.cols()));
    } else {
        for (const auto& w : like.as_net()->layers()) sums_.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
}

void FunctionModel::Averager::add(const FunctionModel& m) {
    if (const auto* t = m.as_table()) {
        sums_[0] += t->values;
    } else {
        const auto& layers = m.as_net()->layers();
        for (std::size_t h = 0; h < layers.size(); ++h) sums_[h] += layers[h];
    }
    ++count_;
}

FunctionModel FunctionModel::Averager::mean() const {
    if (count_ == 0) return prototype_;
    FunctionModel out = prototype_;
    const double inv = 1.0 / static_cast<double>(count_);
    if (auto* t = std::get_if<TabularParams>(&out.params_)) {
        t->values = sums_[0] * inv;
    } else {
        auto& layers = std::get<DeepNet>(out.params_).layers();
        for (std::size_t h = 0; h < layers.size(); ++h) layers[h] = sums_[h] * inv;
    }
    return out;
}

} // namespace varac
