#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "varac/mdp.hpp"

namespace varac {

/// (width, depth, radius) of one network.
struct NetSpec {
    std::size_t width = 64;
    std::size_t depth = 2;
    double radius = 10.0;
};

/// H-layer, width-m ReLU network with 1/sqrt(m) scaling and a fixed +-1
/// output layer. Layer h maps R^{in} -> R^m through W_h^T, so W_1 is d x m
/// and W_h is m x m for h >= 2. Only the W_h are trainable and each must
/// stay within Frobenius distance `radius` of its initial value.
class DeepNet {
public:
    DeepNet(std::vector<Eigen::MatrixXd> layers, Eigen::VectorXd output_signs, double radius);
    DeepNet(std::vector<Eigen::MatrixXd> layers, std::vector<Eigen::MatrixXd> anchor, Eigen::VectorXd output_signs,
            double radius);

    std::size_t depth() const { return layers_.size(); }
    std::size_t width() const { return static_cast<std::size_t>(output_signs_.size()); }
    std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().rows()); }
    double radius() const { return radius_; }
    std::size_t parameter_count() const;

    const std::vector<Eigen::MatrixXd>& layers() const { return layers_; }
    std::vector<Eigen::MatrixXd>& layers() { return layers_; }
    const std::vector<Eigen::MatrixXd>& anchor() const { return anchor_; }
    const Eigen::VectorXd& output_signs() const { return output_signs_; }

    /// ||W_h - W_h^0||_F.
    double distance_from_anchor(std::size_t h) const;
    /// True when every layer is inside its ball (relative slack `tol`).
    bool in_ball(double tol = 1e-12) const;

    bool operator==(const DeepNet& other) const;

private:
    std::vector<Eigen::MatrixXd> layers_;
    std::vector<Eigen::MatrixXd> anchor_;
    Eigen::VectorXd output_signs_;
    double radius_;
};

/// Gradient of the scalar output with respect to each W_h (same shapes).
using NetGradient = std::vector<Eigen::MatrixXd>;

/// Gaussian N(0,1) weights, Rademacher output signs; anchor = the draw.
DeepNet init_net(std::size_t input_dim, std::size_t width, std::size_t depth, double radius, std::uint64_t seed);

/// Scratch buffers reused across kernel calls.
struct NetWorkspace {
    std::vector<Eigen::VectorXd> activations;  // x^(0..H)
    std::vector<Eigen::VectorXd> preacts;      // W_h^T x^(h-1), h = 1..H
    std::vector<Eigen::VectorXd> deltas;       // d out / d preact_h
    Eigen::VectorXd back;
};

// OpenMP kernels; parallel over hidden units when the width is large enough.
double forward(const DeepNet& net, const Eigen::VectorXd& x);
double forward(const DeepNet& net, const Eigen::VectorXd& x, NetWorkspace& ws);
NetGradient gradient(const DeepNet& net, const Eigen::VectorXd& x);
/// W_h += coeff * d out / d W_h at x, all layers evaluated at the pre-update
/// weights. Leaves the forward pass at x in `ws`.
/// `forward_done`: ws already holds forward(net, x).
void apply_gradient_step(DeepNet& net, const Eigen::VectorXd& x, double coeff, NetWorkspace& ws,
                         bool forward_done = false);
/// Radial projection of each layer onto its Frobenius ball.
void project_in_place(DeepNet& net);
DeepNet project(DeepNet net);

/// Serial straight-loop versions kept as the reference the kernels are
/// tested and benchmarked against.
namespace reference {
double forward(const DeepNet& net, const Eigen::VectorXd& x);
NetGradient gradient(const DeepNet& net, const Eigen::VectorXd& x);
void project_in_place(DeepNet& net);
} // namespace reference

/// One-hot embedding of (s, a) at index s * n_actions + a.
Eigen::VectorXd embed(const TabularMdp& mdp, std::size_t s, std::size_t a);
Eigen::VectorXd embed(std::size_t n_states, std::size_t n_actions, std::size_t s, std::size_t a);

/// Versioned JSON snapshot (weights, anchor, signs, radius).
std::string net_to_json(const DeepNet& net);
DeepNet net_from_json(const std::string& text);

} // namespace varac
