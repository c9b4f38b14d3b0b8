#include "ncs/policy.hpp"

#include <cmath>

#include <fmt/format.h>

#include "ncs/errors.hpp"

namespace ncs {

Vec apply_gains(const FeedbackGains& g, const Vec& z, std::span<const Vec> past_controls) {
  Vec u = -g.k0 * z;
  for (std::size_t j = 0; j < g.kj.size(); ++j) u.noalias() -= g.kj[j] * past_controls[j];
  return u;
}

Vec decide(const PolicySpec& policy, const DecisionContext& ctx, int m) {
  const int mode = ctx.observed_modes.back();
  Vec u = std::visit(
      [&](const auto& p) -> Vec {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, StationaryPolicy>) {
          return apply_gains(p.gains.at(static_cast<std::size_t>(mode)), ctx.z, ctx.past_controls);
        } else if constexpr (std::is_same_v<P, TimeVaryingPolicy>) {
          const std::size_t idx = static_cast<std::size_t>(ctx.t);
          if (idx >= p.gains.size()) return Vec::Zero(m);
          return apply_gains(p.gains[idx].at(static_cast<std::size_t>(mode)), ctx.z, ctx.past_controls);
        } else if constexpr (std::is_same_v<P, ExplicitControls>) {
          std::vector<int> key(ctx.observed_modes.begin(), ctx.observed_modes.end());
          auto it = p.controls.find(key);
          if (it == p.controls.end()) {
            throw ShapeMismatch(fmt::format("explicit policy has no control for a prefix of length {}", key.size()));
          }
          return it->second;
        } else {
          return p.rule(ctx);
        }
      },
      policy);
  if (u.size() != m) throw ShapeMismatch(fmt::format("policy returned a control of size {}, expected {}", u.size(), m));
  return u;
}

InitialData normalize_initial(const JumpSystem& sys, InitialData init) {
  const int n = sys.n();
  const int m = sys.m();
  const int d = sys.d();
  if (init.x0.size() != n) throw DimensionMismatch(fmt::format("x0 must have {} entries", n));
  if (init.u_c_history.empty() && d > 0) init.u_c_history.assign(static_cast<std::size_t>(d), Vec::Zero(m));
  if (static_cast<int>(init.u_c_history.size()) != d) {
    throw DimensionMismatch(fmt::format("u_c history must hold {} controls", d));
  }
  for (const auto& u : init.u_c_history) {
    if (u.size() != m) throw DimensionMismatch(fmt::format("history controls must have {} entries", m));
  }
  if (init.u_a_prev.size() == 0) init.u_a_prev = Vec::Zero(m);
  if (init.u_a_prev.size() != m) throw DimensionMismatch(fmt::format("u_a_prev must have {} entries", m));
  if (init.mode_distribution.size() == 0) init.mode_distribution = stationary_distribution(sys.chain);
  if (init.mode_distribution.size() != sys.num_modes()) {
    throw DimensionMismatch(fmt::format("initial mode distribution must have {} entries", sys.num_modes()));
  }
  if (init.mode_distribution.minCoeff() < 0.0 || std::abs(init.mode_distribution.sum() - 1.0) > 1e-9) {
    throw NonStochastic("initial mode distribution must be non-negative and sum to 1");
  }
  return init;
}

LoopState initial_state(const JumpSystem& sys, const InitialData& init, int initial_mode) {
  LoopState s;
  s.t = 0;
  s.z.resize(sys.nz());
  s.z << init.x0, init.u_a_prev;
  const int d = sys.d();
  s.pending.reserve(static_cast<std::size_t>(d));
  for (int j = 1; j <= d; ++j) s.pending.push_back(init.u_c_history[static_cast<std::size_t>(d - j)]);
  s.observed.push_back(initial_mode);
  return s;
}

Vec decide_control(const PolicySpec& policy, const LoopState& s, int m) {
  DecisionContext ctx{s.t, std::span<const int>(s.observed), s.z, std::span<const Vec>(s.pending)};
  return decide(policy, ctx, m);
}

const Vec& arriving_control(const LoopState& s, const Vec& u_t) { return s.pending.empty() ? u_t : s.pending.back(); }

double advance(const JumpSystem& sys, LoopState& s, const Vec& u_t, int theta_t) {
  const Vec& ud = arriving_control(s, u_t);
  const auto& am = sys.modes[static_cast<std::size_t>(theta_t)];
  const double stage = s.z.dot(sys.plant.Q * s.z) + ud.dot(sys.plant.R * ud);
  Vec z_next = am.a_bar * s.z + am.b_bar * ud;
  if (!s.pending.empty()) {
    s.pending.pop_back();
    s.pending.insert(s.pending.begin(), u_t);
  }
  s.z = std::move(z_next);
  s.observed.push_back(theta_t);
  ++s.t;
  return stage;
}

namespace {

void walk(const JumpSystem& sys, const PolicySpec& policy, const LoopState& s, double w, double cost, int steps,
          const NodeVisitor& on_node) {
  on_node(s, w, cost);
  if (s.t == steps) return;
  const Vec u = decide_control(policy, s, sys.m());
  const int from = s.observed.back();
  for (int j = 0; j < sys.num_modes(); ++j) {
    const double p = sys.chain.prob(from, j);
    if (p == 0.0) continue;
    LoopState child = s;
    const double stage = advance(sys, child, u, j);
    walk(sys, policy, child, w * p, cost + stage, steps, on_node);
  }
}

}  // namespace

void enumerate_closed_loop(const JumpSystem& sys, const PolicySpec& policy, const InitialData& init, int steps,
                           const NodeVisitor& on_node, std::uint64_t cap) {
  const std::uint64_t n = path_count(sys.num_modes(), steps + 1);
  if (n > cap) throw PathExplosion(n, cap);
  for (int i = 0; i < sys.num_modes(); ++i) {
    const double p = init.mode_distribution(i);
    if (p == 0.0) continue;
    walk(sys, policy, initial_state(sys, init, i), p, 0.0, steps, on_node);
  }
}

}  // namespace ncs
