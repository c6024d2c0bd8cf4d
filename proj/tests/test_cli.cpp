#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "varac/driver.hpp"
#include "varac/mdp_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string output;  // stdout and stderr together
};

Outcome run(const std::string& args, const std::string& env = {}) {
    const std::string cmd = env + (env.empty() ? "" : " ") + VARAC_CLI_PATH + std::string(" ") + args + " 2>&1";
    Outcome out;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.output.append(buf.data(), n);
    const int status = pclose(pipe);
    out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("varac_cli_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

const char* kSmoke = R"(env.family = random
env.n_states = 2
env.n_actions = 2
env.seed = 3
learner.K = 1
learner.T = 500
learner.burn_in = 100
)";

} // namespace

TEST_CASE("run on a minimal config writes one CSV row") {
    TempDir dir("smoke");
    varac::write_file_atomic(dir.path / "smoke.conf", kSmoke);
    const auto res = run("run --config " + (dir.path / "smoke.conf").string() + " --out " + (dir.path / "out").string());
    REQUIRE(res.code == 0);
    const auto csv = slurp(dir.path / "out" / "metrics_seed0.csv");
    const auto rows = varac::metrics_from_csv(csv);
    CHECK(rows.size() == 1);
    const auto summary = nlohmann::json::parse(slurp(dir.path / "out" / "summary_seed0.json"));
    CHECK(summary.at("seed").get<int>() == 0);
    // no temporaries left behind
    for (const auto& e : fs::directory_iterator(dir.path / "out")) {
        CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
    }
}

TEST_CASE("negative alpha exits 2 and names the key") {
    TempDir dir("alpha");
    varac::write_file_atomic(dir.path / "bad.conf", std::string(kSmoke) + "learner.alpha = -0.5\n");
    const auto res = run("run --config " + (dir.path / "bad.conf").string());
    CHECK(res.code == 2);
    CHECK(res.output.find("alpha") != std::string::npos);
}

TEST_CASE("two seeds give two CSVs with the same schema and different data") {
    TempDir dir("seeds");
    varac::write_file_atomic(dir.path / "s.conf", kSmoke);
    const auto res = run("run --config " + (dir.path / "s.conf").string() + " --out " + (dir.path / "out").string() +
                         " --seeds 1,2");
    REQUIRE(res.code == 0);
    const auto a = slurp(dir.path / "out" / "metrics_seed1.csv");
    const auto b = slurp(dir.path / "out" / "metrics_seed2.csv");
    CHECK(a.substr(0, a.find('\n')) == b.substr(0, b.find('\n')));
    CHECK(a != b);
}

TEST_CASE("oracle on the portfolio env reports the constrained optimum") {
    TempDir dir("oracle");
    const auto env = (dir.path / "portfolio.json").string();
    REQUIRE(run("gen-env --family portfolio --seed 0 --out " + env).code == 0);
    auto res = run("oracle --env " + env + " --alpha 0.1 --n-cap 10");
    REQUIRE(res.code == 0);
    auto j = nlohmann::json::parse(res.output);
    CHECK(std::abs(j.at("value").get<double>() - 0.439048) <= 1e-3);
    CHECK(j.at("lambda_star").get<double>() > 0.0);
    for (const char* key : {"y_star", "pi_star", "certificate"}) CHECK(j.contains(key));

    res = run("oracle --env " + env + " --alpha 100 --n-cap 10");
    REQUIRE(res.code == 0);
    j = nlohmann::json::parse(res.output);
    CHECK(j.at("lambda_star").get<double>() == 0.0);
}

TEST_CASE("malformed env file exits 2") {
    TempDir dir("malformed");
    varac::write_file_atomic(dir.path / "bad.json", "{\"transition\": [[0.5, 0.6]]");
    CHECK(run("oracle --env " + (dir.path / "bad.json").string() + " --alpha 0.1 --n-cap 10").code == 2);
    CHECK(run("oracle --env " + (dir.path / "missing.json").string() + " --alpha 0.1 --n-cap 10").code == 2);
}

TEST_CASE("gen-env is deterministic") {
    TempDir dir("genenv");
    const auto a = (dir.path / "a.json").string();
    const auto b = (dir.path / "b.json").string();
    REQUIRE(run("gen-env --family random --seed 5 --n-states 4 --out " + a).code == 0);
    REQUIRE(run("gen-env --family random --seed 5 --n-states 4 --out " + b).code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(varac::load_mdp(a).n_states() == 4);
    CHECK(run("gen-env --family maze --seed 5 --out " + a).code == 2);
}

TEST_CASE("check passes and lists its properties") {
    const auto res = run("check");
    CHECK(res.code == 0);
    int listed = 0;
    std::istringstream lines(res.output);
    for (std::string line; std::getline(lines, line);) {
        if (line.find(" pass ") != std::string::npos || line.find(" FAIL ") != std::string::npos) ++listed;
    }
    CHECK(listed >= 6);
}

TEST_CASE("check fails when its tolerances are corrupted") {
    const auto res = run("check --inject-failure");
    CHECK(res.code == 1);
    CHECK(res.output.find("FAIL") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run("").code != 0);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("oracle --alpha 0.1").code == 2);
}

TEST_CASE("debug invariants via the environment variable") {
    TempDir dir("debug");
    varac::write_file_atomic(dir.path / "d.conf", kSmoke);
    const auto res = run("run --config " + (dir.path / "d.conf").string() + " --out " + (dir.path / "out").string(),
                         "VARAC_DEBUG_INVARIANTS=1");
    CHECK(res.code == 0);
}
