#include "varac/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "varac/errors.hpp"
#include "varac/mdp_io.hpp"

namespace varac {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(out)) throw ConfigError(key, "expected a number, got '" + v + "'");
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
    }
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw ConfigError(key, "integer out of range");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError(key, "expected true/false, got '" + v + "'");
}

} // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_uint("run.seeds", trim(item)));
    if (out.empty()) throw ConfigError("run.seeds", "empty seed list");
    return out;
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    LearnerConfig& L = cfg.learner;
    EnvSpec& E = cfg.env_spec;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto dbl = [](double& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = to_double(k, v); }; };
    auto size = [](std::size_t& dst) -> Setter {
        return [&dst](const std::string& k, const std::string& v) { dst = static_cast<std::size_t>(to_uint(k, v)); };
    };
    auto u64 = [](std::uint64_t& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = to_uint(k, v); }; };
    auto flag = [](bool& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = to_bool(k, v); }; };
    auto fclass = [](FunctionClass& dst) -> Setter {
        return [&dst](const std::string& k, const std::string& v) {
            if (v != "tabular" && v != "dnn") throw ConfigError(k, "expected tabular or dnn");
            dst = parse_function_class(v);
        };
    };

    std::map<std::string, Setter> keys{
        {"env.path", [&](const std::string&, const std::string& v) { cfg.env_path = base_dir / v; }},
        {"env.family",
         [&](const std::string& k, const std::string& v) {
             try {
                 E.family = parse_env_family(v);
             } catch (const SpecInvalid& e) {
                 throw ConfigError(k, e.what());
             }
         }},
        {"env.n_states", size(E.n_states)},
        {"env.n_actions", size(E.n_actions)},
        {"env.seed", u64(E.seed)},
        {"env.mix", dbl(E.mix)},
        {"env.reward_scale", dbl(E.reward_scale)},
        {"env.safe_return", dbl(E.safe_return)},
        {"env.risky_low", dbl(E.risky_low)},
        {"env.risky_high", dbl(E.risky_high)},
        {"learner.K", size(L.K)},
        {"learner.T", size(L.T)},
        {"learner.beta", dbl(L.beta)},
        {"learner.gamma", dbl(L.gamma)},
        {"learner.N", dbl(L.N)},
        {"learner.alpha", dbl(L.alpha)},
        {"learner.zeta", [&](const std::string& k, const std::string& v) { L.zeta = to_double(k, v); }},
        {"learner.delta", [&](const std::string& k, const std::string& v) { L.delta = to_double(k, v); }},
        {"learner.actor", fclass(L.actor_class)},
        {"learner.critic", fclass(L.critic_class)},
        {"learner.burn_in", size(L.burn_in)},
        {"learner.exact_metrics", flag(L.exact_metrics)},
        {"learner.debug_invariants", flag(L.debug_invariants)},
        {"run.seeds", [&](const std::string&, const std::string& v) { cfg.seeds = parse_seed_list(v); }},
        {"run.out_dir", [&](const std::string&, const std::string& v) { cfg.out_dir = base_dir / v; }},
        {"oracle.enabled", flag(cfg.oracle)},
        {"oracle.lambda_res", dbl(cfg.lambda_res)},
        {"oracle.y_res", dbl(cfg.y_res)},
    };
    for (auto [name, spec] : {std::pair<const char*, NetSpec*>{"actor_net", &L.actor_net},
                              {"critic_q_net", &L.critic_q_net},
                              {"critic_w_net", &L.critic_w_net}}) {
        const std::string p = std::string("learner.") + name;
        keys[p + ".m"] = size(spec->width);
        keys[p + ".H"] = size(spec->depth);
        keys[p + ".R"] = dbl(spec->radius);
    }

    std::map<std::string, bool> seen;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("", "line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = keys.find(key);
        if (it == keys.end()) throw ConfigError(key, "unknown key");
        if (seen[key]) throw ConfigError(key, "duplicate key");
        seen[key] = true;
        it->second(key, value);
    }

    L.validate();
    if (!(cfg.lambda_res > 0.0)) throw ConfigError("oracle.lambda_res", "must be positive");
    if (!(cfg.y_res > 0.0)) throw ConfigError("oracle.y_res", "must be positive");
    if (!(E.mix > 0.0 && E.mix <= 1.0)) throw ConfigError("env.mix", "must lie in (0, 1]");
    if (!(E.reward_scale > 0.0)) throw ConfigError("env.reward_scale", "must be positive");
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.parent_path());
}

TabularMdp build_env(const RunConfig& cfg) {
    if (cfg.env_path) return load_mdp(*cfg.env_path);
    return generate(cfg.env_spec);
}

} // namespace varac
