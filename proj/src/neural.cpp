#include "varac/neural.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "varac/errors.hpp"
#include "varac/rng.hpp"

namespace varac {

namespace {

// Below this width the fork/join cost dominates.
constexpr Eigen::Index kParallelWidth = 128;
constexpr Eigen::Index kBlock = 32;
constexpr double kProjectSlack = 1e-12;

// Calls f(begin, length) over [0, n) in chunks of kBlock, in parallel for wide layers.
template <class F>
void for_blocks(Eigen::Index n, F&& f) {
    const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static) if (n >= kParallelWidth)
    for (Eigen::Index b = 0; b < blocks; ++b) {
        const Eigen::Index begin = b * kBlock;
        f(begin, std::min(kBlock, n - begin));
    }
}

void check_input(const DeepNet& net, const Eigen::VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != net.input_dim()) {
        throw DimensionMismatch("input has dimension " + std::to_string(x.size()) + ", network expects " +
                                std::to_string(net.input_dim()));
    }
}

void check_layers(const std::vector<Eigen::MatrixXd>& layers, Eigen::Index width) {
    if (layers.empty()) throw DimensionMismatch("network needs at least one layer");
    if (width < 1) throw DimensionMismatch("network width must be positive");
    for (std::size_t h = 0; h < layers.size(); ++h) {
        if (layers[h].cols() != width || (h > 0 && layers[h].rows() != width)) {
            throw DimensionMismatch("layer " + std::to_string(h + 1) + " has the wrong shape");
        }
    }
}

} // namespace

DeepNet::DeepNet(std::vector<Eigen::MatrixXd> layers, Eigen::VectorXd output_signs, double radius)
    : layers_(std::move(layers)), output_signs_(std::move(output_signs)), radius_(radius) {
    check_layers(layers_, output_signs_.size());
    anchor_ = layers_;
    if (radius_ < 0.0) throw Error("network radius must be non-negative");
}

DeepNet::DeepNet(std::vector<Eigen::MatrixXd> layers, std::vector<Eigen::MatrixXd> anchor,
                 Eigen::VectorXd output_signs, double radius)
    : layers_(std::move(layers)), anchor_(std::move(anchor)), output_signs_(std::move(output_signs)),
      radius_(radius) {
    check_layers(layers_, output_signs_.size());
    check_layers(anchor_, output_signs_.size());
    if (anchor_.size() != layers_.size() || anchor_.front().rows() != layers_.front().rows()) {
        throw DimensionMismatch("anchor does not match the layers");
    }
    if (radius_ < 0.0) throw Error("network radius must be non-negative");
}

std::size_t DeepNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : layers_) n += static_cast<std::size_t>(w.size());
    return n;
}

double DeepNet::distance_from_anchor(std::size_t h) const { return (layers_[h] - anchor_[h]).norm(); }

bool DeepNet::in_ball(double tol) const {
    for (std::size_t h = 0; h < depth(); ++h) {
        if (distance_from_anchor(h) > radius_ * (1.0 + tol) + tol) return false;
    }
    return true;
}

bool DeepNet::operator==(const DeepNet& other) const {
    return layers_ == other.layers_ && anchor_ == other.anchor_ && output_signs_ == other.output_signs_ &&
           radius_ == other.radius_;
}

DeepNet init_net(std::size_t input_dim, std::size_t width, std::size_t depth, double radius, std::uint64_t seed) {
    if (input_dim < 1 || width < 1 || depth < 1) throw Error("init_net: d, m and H must be at least 1");
    if (radius < 0.0) throw Error("init_net: radius must be non-negative");
    Rng rng(seed);
    Rng weight_rng = rng.split(0);
    Rng sign_rng = rng.split(1);
    const auto m = static_cast<Eigen::Index>(width);
    std::vector<Eigen::MatrixXd> layers;
    layers.reserve(depth);
    for (std::size_t h = 0; h < depth; ++h) {
        const Eigen::Index rows = h == 0 ? static_cast<Eigen::Index>(input_dim) : m;
        Eigen::MatrixXd w(rows, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = weight_rng.normal();
        }
        layers.push_back(std::move(w));
    }
    Eigen::VectorXd b(m);
    for (Eigen::Index j = 0; j < m; ++j) b(j) = (sign_rng() & 1U) ? 1.0 : -1.0;
    return DeepNet(std::move(layers), std::move(b), radius);
}

double forward(const DeepNet& net, const Eigen::VectorXd& x) {
    NetWorkspace ws;
    return forward(net, x, ws);
}

double forward(const DeepNet& net, const Eigen::VectorXd& x, NetWorkspace& ws) {
    check_input(net, x);
    const std::size_t H = net.depth();
    const auto m = static_cast<Eigen::Index>(net.width());
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    ws.activations.resize(H + 1);
    ws.preacts.resize(H);
    ws.activations[0] = x;
    for (std::size_t h = 0; h < H; ++h) {
        const Eigen::MatrixXd& w = net.layers()[h];
        const Eigen::VectorXd& in = ws.activations[h];
        Eigen::VectorXd& pre = ws.preacts[h];
        Eigen::VectorXd& out = ws.activations[h + 1];
        pre.resize(m);
        out.resize(m);
        for_blocks(m, [&](Eigen::Index j0, Eigen::Index len) {
            pre.segment(j0, len).noalias() = w.middleCols(j0, len).transpose() * in;
            out.segment(j0, len) = scale * pre.segment(j0, len).cwiseMax(0.0);
        });
    }
    return net.output_signs().dot(ws.activations[H]);
}

namespace {

// Fills ws.deltas assuming ws holds the forward pass at the current weights.
void backward(const DeepNet& net, NetWorkspace& ws) {
    const std::size_t H = net.depth();
    const auto m = static_cast<Eigen::Index>(net.width());
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    ws.deltas.resize(H);
    ws.back = net.output_signs();
    for (std::size_t h = H; h-- > 0;) {
        Eigen::VectorXd& delta = ws.deltas[h];
        delta.resize(m);
        const Eigen::VectorXd& pre = ws.preacts[h];
        // ReLU'(0) is taken as 0.
        for (Eigen::Index j = 0; j < m; ++j) delta(j) = pre(j) > 0.0 ? scale * ws.back(j) : 0.0;
        if (h == 0) break;
        const Eigen::MatrixXd& w = net.layers()[h];
        Eigen::VectorXd next(m);
        for_blocks(m, [&](Eigen::Index i0, Eigen::Index len) {
            next.segment(i0, len).noalias() = w.middleRows(i0, len) * delta;
        });
        ws.back = std::move(next);
    }
}

} // namespace

NetGradient gradient(const DeepNet& net, const Eigen::VectorXd& x) {
    NetWorkspace ws;
    forward(net, x, ws);
    backward(net, ws);
    NetGradient grad(net.depth());
    const auto m = static_cast<Eigen::Index>(net.width());
    for (std::size_t h = 0; h < net.depth(); ++h) {
        const Eigen::VectorXd& in = ws.activations[h];
        grad[h].resize(in.size(), m);
#pragma omp parallel for schedule(static) if (m >= kParallelWidth)
        for (Eigen::Index j = 0; j < m; ++j) grad[h].col(j) = in * ws.deltas[h](j);
    }
    return grad;
}

void apply_gradient_step(DeepNet& net, const Eigen::VectorXd& x, double coeff, NetWorkspace& ws, bool forward_done) {
    if (!forward_done) forward(net, x, ws);
    backward(net, ws);
    const auto m = static_cast<Eigen::Index>(net.width());
    for (std::size_t h = 0; h < net.depth(); ++h) {
        Eigen::MatrixXd& w = net.layers()[h];
        const Eigen::VectorXd& in = ws.activations[h];
        const Eigen::VectorXd& delta = ws.deltas[h];
        for_blocks(m, [&](Eigen::Index j0, Eigen::Index len) {
            w.middleCols(j0, len).noalias() += in * (coeff * delta.segment(j0, len)).transpose();
        });
    }
}

void project_in_place(DeepNet& net) {
    const double R = net.radius();
    for (std::size_t h = 0; h < net.depth(); ++h) {
        Eigen::MatrixXd& w = net.layers()[h];
        const Eigen::MatrixXd& w0 = net.anchor()[h];
        const Eigen::Index cols = w.cols();
        std::vector<double> partial(static_cast<std::size_t>((cols + kBlock - 1) / kBlock), 0.0);
        for_blocks(cols, [&](Eigen::Index j0, Eigen::Index len) {
            partial[static_cast<std::size_t>(j0 / kBlock)] = (w.middleCols(j0, len) - w0.middleCols(j0, len)).squaredNorm();
        });
        double sq = 0.0;
        for (double v : partial) sq += v;
        const double dist = std::sqrt(sq);
        // Slack keeps the map idempotent after rounding.
        if (dist <= R * (1.0 + kProjectSlack)) continue;
        const double shrink = R / dist;
        for_blocks(cols, [&](Eigen::Index j0, Eigen::Index len) {
            w.middleCols(j0, len) = w0.middleCols(j0, len) + shrink * (w.middleCols(j0, len) - w0.middleCols(j0, len));
        });
    }
}

DeepNet project(DeepNet net) {
    project_in_place(net);
    return net;
}

namespace reference {

double forward(const DeepNet& net, const Eigen::VectorXd& x) {
    check_input(net, x);
    const std::size_t m = net.width();
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    std::vector<double> cur(x.data(), x.data() + x.size());
    for (const auto& w : net.layers()) {
        std::vector<double> next(m, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < cur.size(); ++i) {
                acc += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * cur[i];
            }
            next[j] = scale * std::max(0.0, acc);
        }
        cur = std::move(next);
    }
    double out = 0.0;
    for (std::size_t j = 0; j < m; ++j) out += net.output_signs()(static_cast<Eigen::Index>(j)) * cur[j];
    return out;
}

NetGradient gradient(const DeepNet& net, const Eigen::VectorXd& x) {
    check_input(net, x);
    const std::size_t H = net.depth();
    const std::size_t m = net.width();
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    std::vector<std::vector<double>> acts(H + 1);
    std::vector<std::vector<bool>> active(H);
    acts[0].assign(x.data(), x.data() + x.size());
    for (std::size_t h = 0; h < H; ++h) {
        const auto& w = net.layers()[h];
        acts[h + 1].assign(m, 0.0);
        active[h].assign(m, false);
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < acts[h].size(); ++i) {
                acc += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * acts[h][i];
            }
            active[h][j] = acc > 0.0;
            acts[h + 1][j] = active[h][j] ? scale * acc : 0.0;
        }
    }
    NetGradient grad(H);
    std::vector<double> upstream(m);
    for (std::size_t j = 0; j < m; ++j) upstream[j] = net.output_signs()(static_cast<Eigen::Index>(j));
    for (std::size_t h = H; h-- > 0;) {
        std::vector<double> delta(m);
        for (std::size_t j = 0; j < m; ++j) delta[j] = active[h][j] ? scale * upstream[j] : 0.0;
        const auto rows = static_cast<Eigen::Index>(acts[h].size());
        grad[h] = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(m));
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < m; ++j) grad[h](i, static_cast<Eigen::Index>(j)) = acts[h][static_cast<std::size_t>(i)] * delta[j];
        }
        if (h == 0) break;
        std::vector<double> prev(m, 0.0);
        const auto& w = net.layers()[h];
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) prev[i] += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * delta[j];
        }
        upstream = std::move(prev);
    }
    return grad;
}

void project_in_place(DeepNet& net) {
    for (std::size_t h = 0; h < net.depth(); ++h) {
        auto& w = net.layers()[h];
        const auto& w0 = net.anchor()[h];
        double sq = 0.0;
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            for (Eigen::Index i = 0; i < w.rows(); ++i) sq += (w(i, j) - w0(i, j)) * (w(i, j) - w0(i, j));
        }
        const double dist = std::sqrt(sq);
        if (dist <= net.radius() * (1.0 + kProjectSlack)) continue;
        const double shrink = net.radius() / dist;
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = w0(i, j) + shrink * (w(i, j) - w0(i, j));
        }
    }
}

} // namespace reference

Eigen::VectorXd embed(std::size_t n_states, std::size_t n_actions, std::size_t s, std::size_t a) {
    if (s >= n_states || a >= n_actions) {
        throw IndexOutOfRange("embedding index (" + std::to_string(s) + ", " + std::to_string(a) + ") out of range");
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_states * n_actions));
    x(static_cast<Eigen::Index>(s * n_actions + a)) = 1.0;
    return x;
}

Eigen::VectorXd embed(const TabularMdp& mdp, std::size_t s, std::size_t a) {
    return embed(mdp.n_states(), mdp.n_actions(), s, a);
}

namespace {

constexpr int kSnapshotVersion = 1;

nlohmann::json matrices_to_json(const std::vector<Eigen::MatrixXd>& ms) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& m : ms) {
        out.push_back({{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}});
    }
    return out;
}

std::vector<Eigen::MatrixXd> matrices_from_json(const nlohmann::json& arr) {
    std::vector<Eigen::MatrixXd> out;
    for (const auto& item : arr) {
        const auto rows = item.at("rows").get<Eigen::Index>();
        const auto cols = item.at("cols").get<Eigen::Index>();
        const auto data = item.at("data").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error("net snapshot: matrix size mismatch");
        out.emplace_back(Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols));
    }
    return out;
}

} // namespace

std::string net_to_json(const DeepNet& net) {
    nlohmann::json doc;
    doc["format"] = "varac-net";
    doc["version"] = kSnapshotVersion;
    doc["radius"] = net.radius();
    doc["output_signs"] = std::vector<double>(net.output_signs().data(), net.output_signs().data() + net.width());
    doc["layers"] = matrices_to_json(net.layers());
    doc["anchor"] = matrices_to_json(net.anchor());
    return doc.dump();
}

DeepNet net_from_json(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.at("format") != "varac-net") throw Error("net snapshot: unknown format");
        if (doc.at("version").get<int>() != kSnapshotVersion) throw Error("net snapshot: unsupported version");
        const auto signs = doc.at("output_signs").get<std::vector<double>>();
        Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(signs.data(), static_cast<Eigen::Index>(signs.size()));
        return DeepNet(matrices_from_json(doc.at("layers")), matrices_from_json(doc.at("anchor")), std::move(b),
                       doc.at("radius").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("net snapshot: ") + e.what());
    }
}

} // namespace varac
