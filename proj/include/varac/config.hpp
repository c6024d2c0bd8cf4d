#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "varac/envs.hpp"
#include "varac/learner.hpp"

namespace varac {

struct RunConfig {
    std::optional<std::filesystem::path> env_path;  // used instead of env_spec when set
    EnvSpec env_spec;
    LearnerConfig learner;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path out_dir = "out";
    bool oracle = false;
    double lambda_res = 0.01;
    double y_res = 0.01;
};

/// Flat `key = value` text with `#` comments. Relative env paths resolve
/// against `base_dir`. Throws ConfigError naming the key.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

TabularMdp build_env(const RunConfig& cfg);

} // namespace varac
