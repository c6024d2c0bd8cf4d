#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "varac/errors.hpp"
#include "varac/neural.hpp"
#include "varac/rng.hpp"

using namespace varac;

namespace {

Eigen::VectorXd unit_vector(std::size_t d, Rng& rng) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    return x / x.norm();
}

// Straight-line evaluation of the recursion, written independently of the kernels.
double naive_forward(const DeepNet& net, const Eigen::VectorXd& x) {
    Eigen::VectorXd h = x;
    const double c = 1.0 / std::sqrt(static_cast<double>(net.width()));
    for (const auto& w : net.layers()) h = c * (w.transpose() * h).cwiseMax(0.0);
    return net.output_signs().dot(h);
}

void perturb(DeepNet& net, double scale, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& w : net.layers()) {
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += scale * rng.normal();
    }
}

} // namespace

TEST_CASE("init is deterministic in the seed") {
    CHECK(init_net(5, 16, 2, 1.0, 3) == init_net(5, 16, 2, 1.0, 3));
    CHECK_FALSE(init_net(5, 16, 2, 1.0, 3) == init_net(5, 16, 2, 1.0, 4));
}

TEST_CASE("init draws standard normal weights and balanced signs") {
    const DeepNet net = init_net(8, 4096, 2, 1.0, 11);
    for (const auto& w : net.layers()) {
        const double n = static_cast<double>(w.size());
        const double mean = w.mean();
        const double var = (w.array() - mean).square().sum() / n;
        CHECK(std::abs(mean) <= 3.0 / std::sqrt(n));
        CHECK(std::abs(var - 1.0) <= 0.05);
    }
    const double plus = (net.output_signs().array() > 0).cast<double>().sum() / 4096.0;
    CHECK(plus >= 0.45);
    CHECK(plus <= 0.55);
    CHECK((net.output_signs().array().abs() == 1.0).all());
    CHECK(net.in_ball());
}

TEST_CASE("forward: zero weights give zero") {
    DeepNet net = init_net(3, 8, 2, 1.0, 0);
    for (auto& w : net.layers()) w.setZero();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    x(0) = 1.0;
    CHECK(forward(net, x) == 0.0);
}

TEST_CASE("forward: aligned single unit") {
    Eigen::VectorXd x(3);
    x << 0.6, 0.0, 0.8;
    DeepNet net({Eigen::MatrixXd(x)}, Eigen::VectorXd::Ones(1), 1.0);
    CHECK(forward(net, x) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("forward matches an independent recomputation") {
    Rng rng(5);
    for (std::size_t H : {1u, 2u, 3u}) {
        for (std::size_t m : {8u, 64u, 256u}) {
            const DeepNet net = init_net(6, m, H, 1.0, H * 100 + m);
            const auto x = unit_vector(6, rng);
            const double expect = naive_forward(net, x);
            CHECK(std::abs(forward(net, x) - expect) <= 1e-12);
            CHECK(std::abs(reference::forward(net, x) - expect) <= 1e-12);
        }
    }
}

TEST_CASE("forward rejects a wrong input dimension") {
    const DeepNet net = init_net(4, 8, 2, 1.0, 0);
    CHECK_THROWS_AS(forward(net, Eigen::VectorXd::Ones(3)), DimensionMismatch);
    CHECK_THROWS_AS(gradient(net, Eigen::VectorXd::Ones(5)), DimensionMismatch);
}

TEST_CASE("gradient on one unit: active and dead branches") {
    Eigen::VectorXd x(2);
    x << 0.6, 0.8;
    Eigen::MatrixXd w(2, 1);
    w << 1.0, 0.5;
    DeepNet live({w}, Eigen::VectorXd::Ones(1), 1.0);
    auto g = gradient(live, x);
    CHECK((g[0] - Eigen::MatrixXd(x)).cwiseAbs().maxCoeff() < 1e-15);
    DeepNet dead({Eigen::MatrixXd(-w)}, Eigen::VectorXd::Ones(1), 1.0);
    g = gradient(dead, x);
    CHECK(g[0].isZero());
}

TEST_CASE("gradient matches central differences") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t H = 1 + static_cast<std::size_t>(trial % 3);
        const std::size_t m = trial % 2 == 0 ? 8 : 64;
        const DeepNet net = init_net(5, m, H, 1.0, 1000 + static_cast<std::uint64_t>(trial));
        const auto x = unit_vector(5, rng);
        const auto g = gradient(net, x);
        const auto g_ref = reference::gradient(net, x);
        for (std::size_t h = 0; h < H; ++h) CHECK((g[h] - g_ref[h]).cwiseAbs().maxCoeff() <= 1e-13);
        for (int c = 0; c < 20; ++c) {
            const auto h = static_cast<std::size_t>(rng() % H);
            const auto& w = net.layers()[h];
            const auto i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(w.rows()));
            const auto j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(w.cols()));
            DeepNet up = net;
            DeepNet down = net;
            up.layers()[h](i, j) += 1e-5;
            down.layers()[h](i, j) -= 1e-5;
            const double fd = (forward(up, x) - forward(down, x)) / 2e-5;
            const double an = g[h](i, j);
            const double denom = std::max(std::abs(fd), std::abs(an));
            if (denom < 1e-8) {
                CHECK(std::abs(fd - an) < 1e-8);
            } else {
                CHECK(std::abs(fd - an) / denom <= 1e-4);
            }
        }
    }
}

TEST_CASE("fused gradient step equals explicit update") {
    Rng rng(23);
    DeepNet net = init_net(4, 32, 3, 10.0, 23);
    const auto x = unit_vector(4, rng);
    const auto g = gradient(net, x);
    DeepNet expect = net;
    for (std::size_t h = 0; h < 3; ++h) expect.layers()[h] += -0.01 * g[h];
    NetWorkspace ws;
    apply_gradient_step(net, x, -0.01, ws);
    for (std::size_t h = 0; h < 3; ++h) CHECK((net.layers()[h] - expect.layers()[h]).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("projection") {
    SUBCASE("inside the ball nothing changes") {
        DeepNet net = init_net(4, 8, 2, 100.0, 1);
        perturb(net, 0.01, 2);
        CHECK(project(net) == net);
    }
    SUBCASE("radial scaling to the radius") {
        DeepNet net = init_net(4, 8, 1, 0.5, 1);
        net.layers()[0] += Eigen::MatrixXd::Constant(4, 8, 1.0 / std::sqrt(32.0));  // distance 1 = 2R
        const DeepNet p = project(net);
        CHECK(std::abs(p.distance_from_anchor(0) - 0.5) <= 1e-12);
    }
    SUBCASE("idempotent, non-expansive, matches the serial version") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            DeepNet net = init_net(4, 16, 3, 0.3, seed);
            perturb(net, 0.5, seed + 7);
            const DeepNet once = project(net);
            CHECK(project(once) == once);
            DeepNet serial = net;
            reference::project_in_place(serial);
            for (std::size_t h = 0; h < 3; ++h) {
                CHECK(once.distance_from_anchor(h) <= net.distance_from_anchor(h));
                CHECK((serial.layers()[h] - once.layers()[h]).cwiseAbs().maxCoeff() <= 1e-14);
            }
            CHECK(once.in_ball());
        }
    }
}

TEST_CASE("JSON snapshot round trip") {
    DeepNet net = init_net(3, 8, 2, 2.0, 9);
    perturb(net, 0.1, 10);
    const auto back = net_from_json(net_to_json(net));
    CHECK(back == net);
    CHECK_THROWS_AS(net_from_json("{\"format\": \"other\"}"), Error);
}
