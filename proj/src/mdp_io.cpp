#include "varac/mdp_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "varac/errors.hpp"

namespace varac {

using nlohmann::json;

std::string mdp_to_json(const TabularMdp& mdp) {
    const std::size_t S = mdp.n_states();
    const std::size_t A = mdp.n_actions();
    json transition = json::array();
    json reward = json::array();
    for (std::size_t s = 0; s < S; ++s) {
        json t_s = json::array();
        json r_s = json::array();
        for (std::size_t a = 0; a < A; ++a) {
            json row = json::array();
            for (std::size_t n = 0; n < S; ++n) row.push_back(mdp.p(s, a, n));
            t_s.push_back(std::move(row));
            r_s.push_back(mdp.reward(s, a));
        }
        transition.push_back(std::move(t_s));
        reward.push_back(std::move(r_s));
    }
    json doc;
    doc["n_states"] = S;
    doc["n_actions"] = A;
    doc["transition"] = std::move(transition);
    doc["reward"] = std::move(reward);
    return doc.dump() + "\n";
}

namespace {

std::size_t positive_count(const json& doc, const char* key) {
    if (!doc.contains(key)) throw InvalidMdp(std::string(key) + ": missing");
    const auto& v = doc.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1) {
        throw InvalidMdp(std::string(key) + ": must be a positive integer");
    }
    return v.get<std::size_t>();
}

const json& array_of(const json& v, std::size_t n, const std::string& field) {
    if (!v.is_array()) throw InvalidMdp(field + ": expected an array");
    if (v.size() != n) {
        throw InvalidMdp(field + ": expected " + std::to_string(n) + " entries, found " + std::to_string(v.size()));
    }
    return v;
}

double number_at(const json& v, const std::string& field) {
    if (!v.is_number()) throw InvalidMdp(field + ": expected a number");
    return v.get<double>();
}

} // namespace

TabularMdp mdp_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        // nlohmann reports "line L, column C" in e.what().
        throw InvalidMdp(std::string("syntax error: ") + e.what());
    }
    if (!doc.is_object()) throw InvalidMdp("top level: expected an object");
    const std::size_t S = positive_count(doc, "n_states");
    const std::size_t A = positive_count(doc, "n_actions");
    if (!doc.contains("transition")) throw InvalidMdp("transition: missing");
    if (!doc.contains("reward")) throw InvalidMdp("reward: missing");

    Eigen::MatrixXd transition(static_cast<Eigen::Index>(S * A), static_cast<Eigen::Index>(S));
    Table reward(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(A));
    const auto& t = array_of(doc["transition"], S, "transition");
    const auto& r = array_of(doc["reward"], S, "reward");
    for (std::size_t s = 0; s < S; ++s) {
        const std::string ts = "transition[" + std::to_string(s) + "]";
        const std::string rs = "reward[" + std::to_string(s) + "]";
        const auto& t_s = array_of(t[s], A, ts);
        const auto& r_s = array_of(r[s], A, rs);
        for (std::size_t a = 0; a < A; ++a) {
            const std::string ta = ts + "[" + std::to_string(a) + "]";
            const auto& row = array_of(t_s[a], S, ta);
            for (std::size_t n = 0; n < S; ++n) {
                transition(static_cast<Eigen::Index>(s * A + a), static_cast<Eigen::Index>(n)) =
                    number_at(row[n], ta + "[" + std::to_string(n) + "]");
            }
            reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
                number_at(r_s[a], rs + "[" + std::to_string(a) + "]");
        }
    }
    return TabularMdp(std::move(transition), std::move(reward));
}

TabularMdp load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidMdp("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return mdp_from_json(buf.str());
}

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path) { write_file_atomic(path, mdp_to_json(mdp)); }

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace varac
