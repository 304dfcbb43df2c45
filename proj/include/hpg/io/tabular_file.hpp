#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "hpg/env.hpp"
#include "json.hpp"

// Tabular MDP documents:
//
//   {
//     "n_states": 2, "n_actions": 2,
//     "transition": [...],   // P[s][a][s'] flattened row-major, n_states*n_actions*n_states values
//     "reward": [...],       // r[s][a] flattened row-major, n_states*n_actions values
//     "gamma": 0.9,
//     "rho": [...],          // n_states values
//     "alpha": 1.0
//   }
namespace hpg::io {

inline TabularMdp tabular_from_json(const nlohmann::json& doc) {
  static const std::set<std::string> kKeys = {"n_states", "n_actions", "transition", "reward", "gamma", "rho", "alpha"};
  require(doc.is_object(), "tabular MDP: document must be an object");
  for (const auto& [key, _] : doc.items()) {
    require(kKeys.count(key) > 0, "tabular MDP: unknown key '" + key + "'");
  }
  for (const auto& key : kKeys) require(doc.contains(key), "tabular MDP: missing key '" + key + "'");

  const int ns = doc.at("n_states").get<int>();
  const int na = doc.at("n_actions").get<int>();
  require(ns > 0 && na > 0, "tabular MDP: n_states and n_actions must be positive");
  const auto flat_p = doc.at("transition").get<std::vector<double>>();
  const auto flat_r = doc.at("reward").get<std::vector<double>>();
  require(flat_p.size() == static_cast<std::size_t>(ns) * na * ns,
          "tabular MDP: 'transition' needs n_states*n_actions*n_states values");
  require(flat_r.size() == static_cast<std::size_t>(ns) * na, "tabular MDP: 'reward' needs n_states*n_actions values");

  std::vector<std::vector<std::vector<double>>> p(ns, std::vector<std::vector<double>>(na));
  std::vector<std::vector<double>> r(ns, std::vector<double>(na));
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < na; ++a) {
      const auto off = (static_cast<std::size_t>(s) * na + a) * ns;
      p[s][a].assign(flat_p.begin() + off, flat_p.begin() + off + ns);
      r[s][a] = flat_r[static_cast<std::size_t>(s) * na + a];
    }
  return make_tabular(p, r, doc.at("gamma").get<double>(), doc.at("rho").get<std::vector<double>>(),
                      doc.at("alpha").get<double>());
}

inline nlohmann::json tabular_to_json(const TabularMdp& mdp) {
  std::vector<double> r;
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a) r.push_back(mdp.reward(s, a));
  std::vector<double> rho(mdp.init_dist().data(), mdp.init_dist().data() + mdp.n_states());
  return {{"n_states", mdp.n_states()}, {"n_actions", mdp.n_actions()}, {"transition", mdp.transition_flat()},
          {"reward", r},           {"gamma", mdp.gamma()},          {"rho", rho},
          {"alpha", mdp.alpha()}};
}

inline TabularMdp load_tabular(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "tabular MDP: cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("tabular MDP: " + path.string() + ": " + e.what());
  }
  try {
    return tabular_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("tabular MDP: " + path.string() + ": " + e.what());
  }
}

}  // namespace hpg::io
