#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varac/checks.hpp"
#include "varac/config.hpp"
#include "varac/driver.hpp"
#include "varac/envs.hpp"
#include "varac/errors.hpp"
#include "varac/mdp_io.hpp"
#include "varac/oracle.hpp"

namespace fs = std::filesystem;
using namespace varac;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

bool debug_from_env() {
    const char* v = std::getenv("VARAC_DEBUG_INVARIANTS");
    return v != nullptr && std::string(v) == "1";
}

int cmd_run(const std::string& config_path, const std::string& out, const std::string& seeds) {
    RunConfig cfg;
    std::optional<TabularMdp> mdp;
    try {
        cfg = load_run_config(config_path);
        if (!out.empty()) cfg.out_dir = out;
        if (!seeds.empty()) cfg.seeds = parse_seed_list(seeds);
        if (debug_from_env()) cfg.learner.debug_invariants = true;
        mdp = build_env(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "environment error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        fs::create_directories(cfg.out_dir);
        std::optional<SaddleSolution> oracle;
        if (cfg.oracle) {
            oracle = saddle_search(*mdp, cfg.learner.alpha, cfg.learner.N, cfg.lambda_res, cfg.y_res);
            write_file_atomic(cfg.out_dir / "saddle.json", saddle_to_json(*oracle));
        }
        const auto n = static_cast<long>(cfg.seeds.size());
        std::vector<std::string> errors(cfg.seeds.size());
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < n; ++i) {
            const auto seed = cfg.seeds[static_cast<std::size_t>(i)];
            try {
                LearnerConfig lc = cfg.learner;
                lc.seed = seed;
                const auto res = varac_run(*mdp, lc, oracle ? &*oracle : nullptr);
                const std::string tag = "seed" + std::to_string(seed);
                write_file_atomic(cfg.out_dir / ("metrics_" + tag + ".csv"), metrics_to_csv(res.metrics));
                write_file_atomic(cfg.out_dir / ("summary_" + tag + ".json"),
                                  run_summary_json(*mdp, lc, res, oracle ? &*oracle : nullptr));
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(i)] = e.what();
            }
        }
        int rc = 0;
        for (std::size_t i = 0; i < errors.size(); ++i) {
            if (errors[i].empty()) continue;
            std::cerr << "seed " << cfg.seeds[i] << " failed: " << errors[i] << "\n";
            rc = kExitRuntime;
        }
        if (rc == 0) std::cout << "wrote " << cfg.seeds.size() << " run(s) to " << cfg.out_dir.string() << "\n";
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_oracle(const std::string& env, double alpha, double n_cap, double lambda_res, double y_res) {
    std::optional<TabularMdp> mdp;
    try {
        mdp = load_mdp(env);
    } catch (const Error& e) {
        std::cerr << "environment error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (!(alpha >= 0.0) || !(n_cap > 0.0) || !(lambda_res > 0.0) || !(y_res > 0.0)) {
        std::cerr << "config error: alpha must be non-negative; n-cap and resolutions positive\n";
        return kExitConfig;
    }
    try {
        std::cout << saddle_to_json(saddle_search(*mdp, alpha, n_cap, lambda_res, y_res));
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "oracle failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_gen_env(const EnvSpec& spec, const std::string& out) {
    try {
        const auto mdp = generate(spec);
        if (out == "-") {
            std::cout << mdp_to_json(mdp);
        } else {
            save_mdp(mdp, out);
        }
        return 0;
    } catch (const SpecInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "gen-env failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_check(bool inject_failure) {
    CheckOptions opts;
    if (inject_failure) opts.tolerance_scale = 1e-30;
    const auto results = run_checks(opts);
    bool ok = true;
    std::printf("%-34s %-6s %-12s %s\n", "property", "result", "measured", "tolerance");
    for (const auto& r : results) {
        std::printf("%-34s %-6s %-12.3e %.1e\n", r.name.c_str(), r.passed ? "pass" : "FAIL", r.measured, r.tolerance);
        ok = ok && r.passed;
    }
    if (!ok) {
        for (const auto& r : results) {
            if (!r.passed) std::fprintf(stderr, "failed: %s\n", r.name.c_str());
        }
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"variance-constrained actor-critic"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds;
    auto* run = app.add_subcommand("run", "train over one or more seeds");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory (overrides run.out_dir)");
    run->add_option("--seeds", seeds, "comma separated seeds (overrides run.seeds)");

    std::string env_path;
    double alpha = 0.1, n_cap = 10.0, lambda_res = 0.01, y_res = 0.01;
    auto* oracle = app.add_subcommand("oracle", "grid saddle-point search on a tabular MDP");
    oracle->add_option("--env", env_path, "MDP JSON file")->required();
    oracle->add_option("--alpha", alpha, "variance budget")->required();
    oracle->add_option("--n-cap", n_cap, "multiplier cap N")->required();
    oracle->add_option("--lambda-res", lambda_res, "lambda grid step");
    oracle->add_option("--y-res", y_res, "y grid step");

    EnvSpec spec;
    std::string family = "random", gen_out;
    auto* gen = app.add_subcommand("gen-env", "write a generated MDP as JSON");
    gen->add_option("--family", family, "random | portfolio | gridworld")->required();
    gen->add_option("--seed", spec.seed, "generator seed")->required();
    gen->add_option("--out", gen_out, "output path, - for stdout")->required();
    gen->add_option("--n-states", spec.n_states, "number of states");
    gen->add_option("--n-actions", spec.n_actions, "number of actions");
    gen->add_option("--mix", spec.mix, "mixing weight toward uniform transitions");
    gen->add_option("--reward-scale", spec.reward_scale, "reward scale");

    bool inject = false;
    auto* check = app.add_subcommand("check", "run the identity and invariant suite");
    check->add_flag("--inject-failure", inject)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    if (*run) return cmd_run(config_path, out_dir, seeds);
    if (*oracle) return cmd_oracle(env_path, alpha, n_cap, lambda_res, y_res);
    if (*gen) {
        try {
            spec.family = parse_env_family(family);
        } catch (const SpecInvalid& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return kExitConfig;
        }
        return cmd_gen_env(spec, gen_out);
    }
    if (*check) return cmd_check(inject);
    return kExitConfig;
}
