#include "ncs/cdre_solver.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>

#include "ncs/errors.hpp"
#include "recursion.hpp"

namespace ncs {

CdreSolution::CdreSolution(int horizon, int delay, Mat terminal, std::vector<std::vector<ModeSlice>> slices)
    : horizon_(horizon), delay_(delay), terminal_(std::move(terminal)), slices_(std::move(slices)) {}

const ModeSlice& CdreSolution::at(int k, int mode) const {
  if (!in_horizon(k)) throw OutOfHorizon(fmt::format("k={} outside [{}, {}]", k, delay_, horizon_));
  return slices_[static_cast<std::size_t>(k - delay_)].at(static_cast<std::size_t>(mode));
}

const Mat& CdreSolution::p_bar(int k, int mode) const {
  if (k == horizon_ + 1) return terminal_;
  return at(k, mode).p_bar;
}

CdreSolution solve_cdre(const JumpSystem& sys, int horizon, std::uint64_t cap) {
  const int d = sys.d();
  if (horizon < d) throw DimensionMismatch(fmt::format("horizon N={} must be at least the delay d={}", horizon, d));
  const int modes = sys.num_modes();
  std::vector<std::vector<ModeSlice>> slices(static_cast<std::size_t>(horizon - d + 1));
  auto slot = [&](int k) -> std::vector<ModeSlice>* {
    return k <= horizon ? &slices[static_cast<std::size_t>(k - d)] : nullptr;
  };

  std::vector<Mat> p_next(static_cast<std::size_t>(modes), sys.plant.terminal);
  for (int k = horizon; k >= d; --k) {
    const std::vector<Mat> s1 = detail::s_tilde_one(sys, p_next);
    const detail::SliceLookup later = [&](int offset, int mode) -> const ModeSlice* {
      auto* s = slot(k + offset);
      return s ? &(*s)[static_cast<std::size_t>(mode)] : nullptr;
    };
    std::vector<ModeSlice> cur = detail::gamma_m_step(sys, s1, p_next, later, k, cap);
    const std::vector<ModeSlice>* at_kd = d == 0 ? &cur : slot(k + d);
    std::vector<Mat> p = detail::p_bar_step(sys, p_next, at_kd);
    for (int i = 0; i < modes; ++i) cur[static_cast<std::size_t>(i)].p_bar = p[static_cast<std::size_t>(i)];
    detail::sequences_step(sys, cur, s1, slot(k + 1), at_kd);
    *slot(k) = std::move(cur);
    p_next = std::move(p);
  }
  return CdreSolution(horizon, d, sys.plant.terminal, std::move(slices));
}

std::vector<FeedbackGains> feedback_gains(const CdreSolution& sol, int k) {
  std::vector<FeedbackGains> out;
  for (int i = 0; i < sol.num_modes(); ++i) out.push_back(sol.at(k, i).gains);
  return out;
}

TimeVaryingPolicy optimal_policy(const CdreSolution& sol) {
  TimeVaryingPolicy p;
  p.delay = sol.delay();
  for (int k = sol.delay(); k <= sol.horizon(); ++k) p.gains.push_back(feedback_gains(sol, k));
  return p;
}

Vec costate(const CdreSolution& sol, const LoopState& s) {
  const int k = s.t;
  const int d = sol.delay();
  const int mode = s.observed.back();
  if (k == sol.horizon() + 1) return sol.terminal() * s.z;
  const ModeSlice& sl = sol.at(k, mode);
  Vec lam = sl.p_bar * s.z;
  for (int j = 1; j <= d; ++j) {
    lam.noalias() += sl.f[static_cast<std::size_t>(j - 1)] * s.pending[static_cast<std::size_t>(d - j)];
  }
  return lam;
}

double finite_cost(const JumpSystem& sys, const CdreSolution& sol, const InitialData& init_in) {
  const InitialData init = normalize_initial(sys, init_in);
  const int d = sys.d();
  const PolicySpec policy = optimal_policy(sol);
  double total = 0.0;
  enumerate_closed_loop(
      sys, policy, init, d,
      [&](const LoopState& s, double w, double cost) {
        if (s.t != d) return;
        total += w * (cost + s.z.dot(costate(sol, s)));
      },
      kDefaultPathCap);
  return total;
}

namespace {

struct FbsdeWalker {
  const JumpSystem& sys;
  const CdreSolution& sol;
  const PolicySpec& policy;
  FbsdeReport report;

  void note_scale(const Vec& v) { report.scale = std::max(report.scale, max_abs(v)); }

  // E[B(theta_{t+d})' lambda_{t+d} | observed up to t-1] given u_t.
  Vec stationarity_expectation(const LoopState& s, const Vec& u_t, int depth) {
    const int d = sys.d();
    Vec acc = Vec::Zero(sys.m());
    const int from = s.observed.back();
    for (int j = 0; j < sys.num_modes(); ++j) {
      const double p = sys.chain.prob(from, j);
      if (p == 0.0) continue;
      LoopState child = s;
      advance(sys, child, u_t, j);
      if (depth == d) {
        acc += p * (sys.modes[static_cast<std::size_t>(j)].b_bar.transpose() * costate(sol, child));
      } else {
        acc += p * stationarity_expectation(child, decide_control(policy, child, sys.m()), depth + 1);
      }
    }
    return acc;
  }

  void visit(const LoopState& s) {
    const int d = sys.d();
    const int horizon = sol.horizon();
    if (s.t > horizon) return;
    const Vec u = decide_control(policy, s, sys.m());

    if (s.t + d <= horizon) {
      const Vec e = stationarity_expectation(s, u, 0);
      const Vec ru = sys.plant.R * u;
      note_scale(e);
      note_scale(ru);
      report.stationarity = std::max(report.stationarity, max_abs(e + ru));
    }

    std::vector<LoopState> children;
    Vec e_back = Vec::Zero(sys.nz());
    const int from = s.observed.back();
    for (int j = 0; j < sys.num_modes(); ++j) {
      const double p = sys.chain.prob(from, j);
      if (p == 0.0) continue;
      LoopState child = s;
      advance(sys, child, u, j);
      if (s.t >= d) {
        e_back += p * (sys.modes[static_cast<std::size_t>(j)].a_bar.transpose() * costate(sol, child));
      }
      children.push_back(std::move(child));
    }
    if (s.t >= d) {
      const Vec lam = costate(sol, s);
      const Vec qz = sys.plant.Q * s.z;
      note_scale(lam);
      note_scale(qz);
      note_scale(e_back);
      report.costate = std::max(report.costate, max_abs(lam - qz - e_back));
    }
    for (const auto& c : children) visit(c);
  }
};

}  // namespace

FbsdeReport fbsde_residual(const JumpSystem& sys, const CdreSolution& sol, int trials, std::uint64_t seed,
                           const PolicySpec* policy, std::uint64_t cap) {
  const std::uint64_t n = path_count(sys.num_modes(), sol.horizon() + 2);
  if (n > cap) throw PathExplosion(n, cap);
  const PolicySpec optimal = optimal_policy(sol);
  FbsdeWalker walker{sys, sol, policy ? *policy : optimal, {}};
  std::mt19937_64 rng(seed);
  auto draw = [&](int size) {
    Vec v(size);
    for (int i = 0; i < size; ++i) v(i) = 2.0 * uniform01(rng()) - 1.0;
    return v;
  };
  for (int trial = 0; trial < trials; ++trial) {
    InitialData init;
    init.x0 = draw(sys.n());
    for (int j = 0; j < sys.d(); ++j) init.u_c_history.push_back(draw(sys.m()));
    init.u_a_prev = draw(sys.m());
    init.mode_distribution = Vec::Constant(sys.num_modes(), 1.0 / sys.num_modes());
    for (int i = 0; i < sys.num_modes(); ++i) walker.visit(initial_state(sys, init, i));
  }
  return walker.report;
}

}  // namespace ncs
