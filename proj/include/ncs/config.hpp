#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ncs/plant_model.hpp"
#include "ncs/policy.hpp"
#include "ncs/serialize.hpp"

namespace ncs {

// Parsed and validated run configuration. Any problem raises ConfigError
// naming the dotted field path, e.g. "plant.R".
struct RunConfig {
  RunConfig(JumpSystem sys, InitialData init) : system(std::move(sys)), initial(std::move(init)) {}

  JumpSystem system;
  InitialData initial;  // normalized: defaults filled in
  std::optional<int> horizon;
  double tol = 1e-10;
  int max_iter = 100000;
  std::uint64_t enumeration_cap = std::uint64_t{1} << 22;
  int sim_steps = 50;
  int sim_runs = 1000;
  std::uint64_t seed = 0;
  int window = 10;
  bool include_terminal = false;
  std::string out_dir = ".";
  Format format = Format::Csv;
  std::string hash;
  std::vector<std::string> warnings;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

}  // namespace ncs
