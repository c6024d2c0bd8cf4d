#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "varac/mdp.hpp"

namespace varac {

/// {"n_states": S, "n_actions": A, "transition": [[[..]]], "reward": [[..]]},
/// nested [s][a][s'] and [s][a]. Doubles use shortest round-trip form, so
/// serialize(parse(serialize(m))) is byte-identical to serialize(m).
std::string mdp_to_json(const TabularMdp& mdp);

/// Throws InvalidMdp naming the field (and the line for syntax errors).
TabularMdp mdp_from_json(std::string_view text);

TabularMdp load_mdp(const std::filesystem::path& path);
void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path);

/// Writes `contents` to a temp file beside `path`, then renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

} // namespace varac
