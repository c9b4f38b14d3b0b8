#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <variant>
#include <vector>

#include "ncs/linalg.hpp"
#include "ncs/markov_chain.hpp"
#include "ncs/plant_model.hpp"

namespace ncs {

// u^c_t = -k0 z_t - sum_{j=1..d} kj[j-1] u^c_{t-j}
struct FeedbackGains {
  Mat k0;
  std::vector<Mat> kj;
};

// Everything a controller may look at when choosing u^c_t. The mode of the
// current step is deliberately absent: it is drawn only after the decision.
struct DecisionContext {
  int t;
  std::span<const int> observed_modes;  // theta_{-1}, ..., theta_{t-1}
  const Vec& z;                         // z_t
  std::span<const Vec> past_controls;   // u^c_{t-1}, ..., u^c_{t-d}
};

// Gains indexed by the mode observed at t-1.
struct StationaryPolicy {
  std::vector<FeedbackGains> gains;
};

// gains[k - delay][mode] for k in [delay, delay + gains.size()); the control
// u^c_t uses k = t + delay. Beyond the table the control is zero.
struct TimeVaryingPolicy {
  int delay = 0;
  std::vector<std::vector<FeedbackGains>> gains;
};

// Open-loop controls keyed by the observed prefix theta_{-1..t-1}.
struct ExplicitControls {
  std::map<std::vector<int>, Vec> controls;
};

// Any other adapted rule.
struct AdaptedPolicy {
  std::function<Vec(const DecisionContext&)> rule;
};

using PolicySpec = std::variant<StationaryPolicy, TimeVaryingPolicy, ExplicitControls, AdaptedPolicy>;

Vec apply_gains(const FeedbackGains& g, const Vec& z, std::span<const Vec> past_controls);

Vec decide(const PolicySpec& policy, const DecisionContext& ctx, int m);

// Initial data: x_0, the computed controls u^c_{-d..-1} (oldest first),
// the held actuator value u^a_{-d-1} and a distribution over theta_{-1}.
struct InitialData {
  Vec x0;
  std::vector<Vec> u_c_history;
  Vec u_a_prev;
  Vec mode_distribution;
};

// Fills defaults (zero history and held value, stationary distribution)
// and checks shapes.
InitialData normalize_initial(const JumpSystem& sys, InitialData init);

// Closed-loop state at the start of step t, before u^c_t is chosen.
struct LoopState {
  int t = 0;
  Vec z;                      // [x_t; u^a_{t-d-1}]
  std::vector<Vec> pending;   // u^c_{t-1}, ..., u^c_{t-d}
  std::vector<int> observed;  // theta_{-1}, ..., theta_{t-1}
};

LoopState initial_state(const JumpSystem& sys, const InitialData& init, int initial_mode);

Vec decide_control(const PolicySpec& policy, const LoopState& s, int m);

// The computed control that reaches the actuator at step t.
const Vec& arriving_control(const LoopState& s, const Vec& u_t);

// Applies u^c_t and the realized mode theta_t. Returns the stage cost
// z_t'Q z_t + u^c_{t-d}' R u^c_{t-d}.
double advance(const JumpSystem& sys, LoopState& s, const Vec& u_t, int theta_t);

// Exhaustive closed-loop enumeration. Visits every node of the mode tree
// theta_{-1}, ..., theta_{steps-1} with positive probability. `on_node`
// sees the state at step t = 0..steps, the path probability and the stage
// cost accumulated over steps 0..t-1. Paths are capped at `cap`.
using NodeVisitor = std::function<void(const LoopState& s, double weight, double cost_so_far)>;
void enumerate_closed_loop(const JumpSystem& sys, const PolicySpec& policy, const InitialData& init, int steps,
                           const NodeVisitor& on_node, std::uint64_t cap);

}  // namespace ncs
