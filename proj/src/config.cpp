#include "ncs/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "ncs/errors.hpp"

namespace ncs {

namespace {

using json = nlohmann::json;

const json* find(const json& obj, const char* key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

const json& require(const json& obj, const char* key, const std::string& path) {
  const json* v = find(obj, key);
  if (!v) throw ConfigError(path, "required field is missing");
  return *v;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

// A matrix is a nested array of rows; a bare number is a 1x1 matrix.
Mat matrix(const json& v, const std::string& path) {
  if (v.is_number()) return Mat::Constant(1, 1, v.get<double>());
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a nested array of rows");
  const std::size_t rows = v.size();
  if (!v[0].is_array()) throw ConfigError(path, "expected a nested array of rows");
  const std::size_t cols = v[0].size();
  Mat out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols) throw ConfigError(path, "rows must all have the same length");
    for (std::size_t j = 0; j < cols; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(v[i][j], fmt::format("{}[{}][{}]", path, i, j));
    }
  }
  return out;
}

Vec vector(const json& v, const std::string& path) {
  if (v.is_number()) return Vec::Constant(1, v.get<double>());
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], fmt::format("{}[{}]", path, i));
  return out;
}

template <class T>
T integer(const json& v, const std::string& path, T lo) {
  const bool integral = v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
  if (!integral) throw ConfigError(path, "expected an integer");
  const long long x = v.get<long long>();
  if (x < static_cast<long long>(lo)) throw ConfigError(path, fmt::format("must be at least {}", lo));
  return static_cast<T>(x);
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", fmt::format("not valid JSON: {}", e.what()));
  }
  if (!root.is_object()) throw ConfigError("<file>", "top level must be an object");

  const json& plant = require(root, "plant", "plant");
  Mat A = matrix(require(plant, "A", "plant.A"), "plant.A");
  Mat B = matrix(require(plant, "B", "plant.B"), "plant.B");
  const int d = integer<int>(require(plant, "d", "plant.d"), "plant.d", 0);
  Mat Q = matrix(require(plant, "Q", "plant.Q"), "plant.Q");
  Mat R = matrix(require(plant, "R", "plant.R"), "plant.R");
  Mat terminal;
  if (const json* t = find(plant, "terminal_weight")) terminal = matrix(*t, "plant.terminal_weight");

  if (A.rows() != A.cols()) throw ConfigError("plant.A", "must be square");
  if (B.rows() != A.rows()) throw ConfigError("plant.B", "must have as many rows as A");
  const auto nz = A.rows() + B.cols();
  if (Q.rows() != nz || Q.cols() != nz) throw ConfigError("plant.Q", fmt::format("must be {}x{} (weights z = [x; u])", nz, nz));
  if (R.rows() != B.cols() || R.cols() != B.cols()) throw ConfigError("plant.R", fmt::format("must be {}x{}", B.cols(), B.cols()));
  if (terminal.size() && (terminal.rows() != nz || terminal.cols() != nz)) {
    throw ConfigError("plant.terminal_weight", fmt::format("must be {}x{}", nz, nz));
  }

  std::vector<std::string> warnings;
  PlantModel pm;
  try {
    pm = make_plant(A, B, d, Q, R, terminal, &warnings);
  } catch (const InvalidWeight& e) {
    const std::string what = e.what();
    const std::string field = what.rfind("Q", 0) == 0 ? "plant.Q" : what.rfind("R", 0) == 0 ? "plant.R" : "plant.terminal_weight";
    throw ConfigError(field, what);
  } catch (const Error& e) {
    throw ConfigError("plant", e.what());
  }

  const json& chain_j = require(root, "chain", "chain");
  Mat xi = matrix(require(chain_j, "transition", "chain.transition"), "chain.transition");
  std::optional<MarkovChain> chain;
  try {
    chain = MarkovChain::validate(xi);
  } catch (const Error& e) {
    throw ConfigError("chain.transition", e.what());
  }
  std::vector<int> flags;
  if (const json* f = find(chain_j, "delivery_flags")) {
    const Vec fv = vector(*f, "chain.delivery_flags");
    for (Eigen::Index i = 0; i < fv.size(); ++i) {
      if (fv(i) != 0.0 && fv(i) != 1.0) throw ConfigError("chain.delivery_flags", "flags must be 0 or 1");
      flags.push_back(static_cast<int>(fv(i)));
    }
    if (static_cast<int>(flags.size()) != chain->num_modes()) {
      throw ConfigError("chain.delivery_flags", "need one flag per mode");
    }
  }
  JumpSystem sys = make_system(std::move(pm), *chain, flags);

  InitialData init;
  const json empty = json::object();
  const json* init_j = find(root, "initial");
  const json& ij = init_j ? *init_j : empty;
  init.x0 = find(ij, "x0") ? vector(*find(ij, "x0"), "initial.x0") : Vec::Zero(sys.n());
  if (const json* h = find(ij, "u_c_history")) {
    if (!h->is_array()) throw ConfigError("initial.u_c_history", "expected a list of controls, oldest first");
    for (std::size_t i = 0; i < h->size(); ++i) init.u_c_history.push_back(vector((*h)[i], fmt::format("initial.u_c_history[{}]", i)));
  }
  if (const json* u = find(ij, "u_a_prev")) init.u_a_prev = vector(*u, "initial.u_a_prev");
  if (const json* im = find(chain_j, "initial_mode")) {
    const int mode = integer<int>(*im, "chain.initial_mode", 0);
    if (mode >= sys.num_modes()) throw ConfigError("chain.initial_mode", "mode out of range");
    init.mode_distribution = Vec::Zero(sys.num_modes());
    init.mode_distribution(mode) = 1.0;
  } else if (const json* dist = find(chain_j, "initial_distribution")) {
    init.mode_distribution = vector(*dist, "chain.initial_distribution");
  }
  try {
    init = normalize_initial(sys, init);
  } catch (const NonUnique& e) {
    throw ConfigError("chain.initial_distribution", fmt::format("{}; give an initial mode or distribution", e.what()));
  } catch (const NonStochastic& e) {
    throw ConfigError("chain.initial_distribution", e.what());
  } catch (const Error& e) {
    throw ConfigError("initial", e.what());
  }

  RunConfig cfg(std::move(sys), std::move(init));
  cfg.warnings = std::move(warnings);
  if (const json* s = find(root, "solver")) {
    if (const json* v = find(*s, "N")) cfg.horizon = integer<int>(*v, "solver.N", 0);
    if (const json* v = find(*s, "tol")) cfg.tol = number(*v, "solver.tol");
    if (const json* v = find(*s, "max_iter")) cfg.max_iter = integer<int>(*v, "solver.max_iter", 1);
    if (const json* v = find(*s, "enumeration_cap")) cfg.enumeration_cap = integer<std::uint64_t>(*v, "solver.enumeration_cap", 1);
    if (!(cfg.tol > 0.0)) throw ConfigError("solver.tol", "must be positive");
  }
  if (cfg.horizon && *cfg.horizon < cfg.system.d()) throw ConfigError("solver.N", "must be at least the delay d");
  if (const json* s = find(root, "sim")) {
    if (const json* v = find(*s, "T")) cfg.sim_steps = integer<int>(*v, "sim.T", 1);
    if (const json* v = find(*s, "runs")) cfg.sim_runs = integer<int>(*v, "sim.runs", 1);
    if (const json* v = find(*s, "seed")) cfg.seed = integer<std::uint64_t>(*v, "sim.seed", 0);
    if (const json* v = find(*s, "window")) cfg.window = integer<int>(*v, "sim.window", 2);
    if (const json* v = find(*s, "include_terminal")) {
      if (!v->is_boolean()) throw ConfigError("sim.include_terminal", "expected true or false");
      cfg.include_terminal = v->get<bool>();
    }
  }
  if (const json* o = find(root, "output")) {
    if (const json* v = find(*o, "directory")) {
      if (!v->is_string()) throw ConfigError("output.directory", "expected a string");
      cfg.out_dir = v->get<std::string>();
    }
    if (const json* v = find(*o, "format")) {
      const std::string f = v->is_string() ? v->get<std::string>() : "";
      if (f == "csv") cfg.format = Format::Csv;
      else if (f == "json") cfg.format = Format::Json;
      else throw ConfigError("output.format", "expected \"csv\" or \"json\"");
    }
  }
  cfg.hash = config_hash(text);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("--config", fmt::format("cannot read '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace ncs
