#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "varac/mdp.hpp"
#include "varac/neural.hpp"

namespace varac {

enum class FunctionClass { tabular, dnn };

FunctionClass parse_function_class(const std::string& name);
std::string to_string(FunctionClass fc);

/// One parameter per (s, a): the one-hot linear special case of a network.
struct TabularParams {
    Table values;
    Table anchor;
    double radius = std::numeric_limits<double>::infinity();
};

/// A function of (s, a) trained by the inner loops: either a table or a
/// DeepNet over the one-hot embedding. With `subtract_anchor` the model
/// reports f_theta(s,a) - f_theta0(s,a), which is identically zero at
/// initialization while leaving gradients unchanged.
class FunctionModel {
public:
    static FunctionModel tabular(std::size_t n_states, std::size_t n_actions,
                                 double radius = std::numeric_limits<double>::infinity());
    static FunctionModel network(std::size_t n_states, std::size_t n_actions, DeepNet net, bool subtract_anchor);

    FunctionClass function_class() const {
        return std::holds_alternative<TabularParams>(params_) ? FunctionClass::tabular : FunctionClass::dnn;
    }
    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }

    double value(std::size_t s, std::size_t a) const;
    double value(std::size_t s, std::size_t a, NetWorkspace& ws) const;
    /// Every (s, a) value as an S x A table.
    Table table() const;

    /// theta += coeff * grad_theta f(s, a).
    /// `forward_done`: ws holds the pass from value(s, a, ws) on the current parameters.
    void step(std::size_t s, std::size_t a, double coeff, NetWorkspace& ws, bool forward_done = false);
    /// Projection onto the ball around the anchor.
    void project();
    bool in_ball(double tol = 1e-12) const;

    const TabularParams* as_table() const { return std::get_if<TabularParams>(&params_); }
    const DeepNet* as_net() const { return std::get_if<DeepNet>(&params_); }

    class Averager;

private:
    FunctionModel(std::size_t n_states, std::size_t n_actions, std::variant<TabularParams, DeepNet> params,
                  bool subtract_anchor);
    Eigen::VectorXd embedding(std::size_t s, std::size_t a) const;

    std::size_t n_states_;
    std::size_t n_actions_;
    std::variant<TabularParams, DeepNet> params_;
    bool subtract_anchor_ = false;
    Table anchor_values_;  // f_theta0 for every (s, a), dnn + subtract_anchor only
};

/// Running sum of parameter vectors for path averaging.
class FunctionModel::Averager {
public:
    explicit Averager(const FunctionModel& like);
    void add(const FunctionModel& m);
    /// Arithmetic mean of everything added, as a model sharing the
    /// anchor and configuration of `like`.
    FunctionModel mean() const;
    std::size_t count() const { return count_; }

private:
    FunctionModel prototype_;
    std::vector<Eigen::MatrixXd> sums_;
    std::size_t count_ = 0;
};

} // namespace varac
