#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mollhelm/experiment.hpp"

namespace mollhelm {

/// Full run description. Everything has a default so a minimal config file
/// only needs to name the case; the effective (defaulted) configuration is
/// echoed next to the outputs for reproducibility.
struct RunConfig {
  std::string case_name = "example2";
  int nx = 41;
  int ny = 41;
  std::vector<double> noise_levels = {1e-2, 1e-3, 1e-4};
  AlphaGrid alpha{};
  double solver_tol = 1e-10;
  int solver_max_iter = 0;  // 0: automatic (5 * system size)
  std::uint64_t seed = 20260809;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& scope) {
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw std::invalid_argument("config: unknown key '" + scope + item.key() + "'");
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::reject_unknown_keys(j, {"case", "grid", "noise", "alpha", "solver"}, "");
  if (j.contains("case")) c.case_name = j.at("case").get<std::string>();
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::reject_unknown_keys(g, {"nx", "ny"}, "grid.");
    if (g.contains("nx")) c.nx = g.at("nx").get<int>();
    if (g.contains("ny")) c.ny = g.at("ny").get<int>();
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    detail::reject_unknown_keys(n, {"levels", "seed"}, "noise.");
    if (n.contains("levels")) c.noise_levels = n.at("levels").get<std::vector<double>>();
    if (n.contains("seed")) c.seed = n.at("seed").get<std::uint64_t>();
  }
  if (j.contains("alpha")) {
    const auto& a = j.at("alpha");
    detail::reject_unknown_keys(a, {"alpha0", "q", "n0"}, "alpha.");
    if (a.contains("alpha0")) c.alpha.alpha0 = a.at("alpha0").get<double>();
    if (a.contains("q")) c.alpha.q = a.at("q").get<double>();
    if (a.contains("n0")) c.alpha.n0 = a.at("n0").get<int>();
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    detail::reject_unknown_keys(s, {"tol", "max_iter"}, "solver.");
    if (s.contains("tol")) c.solver_tol = s.at("tol").get<double>();
    if (s.contains("max_iter")) c.solver_max_iter = s.at("max_iter").get<int>();
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: parse error in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["case"] = c.case_name;
  j["grid"] = {{"nx", c.nx}, {"ny", c.ny}};
  j["noise"] = {{"levels", c.noise_levels}, {"seed", c.seed}};
  j["alpha"] = {{"alpha0", c.alpha.alpha0}, {"q", c.alpha.q}, {"n0", c.alpha.n0}};
  j["solver"] = {{"tol", c.solver_tol}, {"max_iter", c.solver_max_iter}};
  return j;
}

inline std::string render_config(const RunConfig& c) {
  return config_to_json(c).dump(2) + "\n";
}

}  // namespace mollhelm
