#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ncs/linalg.hpp"
#include "ncs/plant_model.hpp"
#include "ncs/policy.hpp"

namespace ncs {

// One closed-loop realization over steps k = 0..T-1. Row k holds x_k, the
// control u^c_k computed at k, the actuated value u^a_{k-d} applied at k
// and the stage cost z_k'Q z_k + u^c_{k-d}' R u^c_{k-d}.
struct SimulationTrace {
  int initial_mode = 0;  // theta_{-1}
  std::vector<int> modes;
  Mat x;
  Mat u_c;
  Mat u_a;
  Vec stage_cost;
  double terminal_cost = 0.0;  // z_T' terminal z_T when requested, else 0
  double cum_cost = 0.0;
};

SimulationTrace simulate(const JumpSystem& sys, const PolicySpec& policy, const InitialData& init, int initial_mode,
                         int steps, std::uint64_t seed, bool include_terminal = false);

// Re-runs the plant and actuator from recorded modes and computed controls.
SimulationTrace replay(const JumpSystem& sys, const InitialData& init, int initial_mode, const std::vector<int>& modes,
                       const Mat& u_c, bool include_terminal = false);

struct EnsembleStats {
  int runs = 0;
  Vec mean_sq_state;  // empirical E[x_k' x_k]
  double mean_cum_cost = 0.0;
  double ci95_cum_cost = 0.0;  // normal-approximation half-width
};

// Seed of run `run` in an ensemble seeded with `seed` (splitmix64 mix).
std::uint64_t run_seed(std::uint64_t seed, std::uint64_t run);

// Initial mode of run `run`, drawn from the initial distribution.
int run_initial_mode(const InitialData& init, std::uint64_t seed, std::uint64_t run);

// Run r is simulate(..., run_initial_mode(init, seed, r), T, run_seed(seed, r)).
EnsembleStats monte_carlo(const JumpSystem& sys, const PolicySpec& policy, const InitialData& init, int steps,
                          int runs, std::uint64_t seed, bool include_terminal = false);

struct DecayDiagnostic {
  double rate = 0.0;  // least-squares slope of log mean_sq_state per step
  bool decaying = false;
  std::string verdict;
};

DecayDiagnostic decay_diagnostic(const EnsembleStats& stats, int window, double margin = 1e-3);

void write_trace_csv(std::ostream& os, const SimulationTrace& trace, const std::string& header_line);
void write_ensemble_csv(std::ostream& os, const EnsembleStats& stats, const std::string& header_line);

}  // namespace ncs
