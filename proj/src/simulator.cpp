#include "ncs/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "ncs/errors.hpp"
#include "ncs/serialize.hpp"

namespace ncs {

namespace {

// Shared by simulate and replay so both produce identical arithmetic.
// The plant is stepped in its original (x, u^a) form.
template <class ModeSource, class ControlSource>
SimulationTrace run_loop(const JumpSystem& sys, const InitialData& init_in, int initial_mode, int steps,
                         bool include_terminal, ModeSource&& next_mode, ControlSource&& control) {
  if (steps < 1) throw ShapeMismatch("simulation needs at least one step");
  const InitialData init = normalize_initial(sys, init_in);
  if (initial_mode < 0 || initial_mode >= sys.num_modes()) throw ShapeMismatch("initial mode out of range");
  const int n = sys.n();
  const int m = sys.m();
  const int d = sys.d();
  const auto& plant = sys.plant;

  SimulationTrace tr;
  tr.initial_mode = initial_mode;
  tr.x.resize(steps, n);
  tr.u_c.resize(steps, m);
  tr.u_a.resize(steps, m);
  tr.stage_cost.resize(steps);

  Vec x = init.x0;
  Vec ua_prev = init.u_a_prev;  // u^a_{k-d-1}
  std::vector<Vec> pending;     // u^c_{k-1}, ..., u^c_{k-d}
  for (int j = 1; j <= d; ++j) pending.push_back(init.u_c_history[static_cast<std::size_t>(d - j)]);
  std::vector<int> observed{initial_mode};
  Vec z(n + m);

  for (int k = 0; k < steps; ++k) {
    z << x, ua_prev;
    const Vec u = control(DecisionContext{k, std::span<const int>(observed), z, std::span<const Vec>(pending)});
    if (u.size() != m) throw ShapeMismatch(fmt::format("control of size {} at step {}, expected {}", u.size(), k, m));
    const int theta = next_mode(k, observed.back());
    const Vec& arriving = d == 0 ? u : pending.back();
    const Vec ua = actuator_update(sys.flags[static_cast<std::size_t>(theta)] == 1, arriving, ua_prev);

    tr.x.row(k) = x.transpose();
    tr.u_c.row(k) = u.transpose();
    tr.u_a.row(k) = ua.transpose();
    tr.modes.push_back(theta);
    tr.stage_cost(k) = z.dot(plant.Q * z) + arriving.dot(plant.R * arriving);

    x = plant_step(x, ua, plant);
    ua_prev = ua;
    if (d > 0) {
      pending.pop_back();
      pending.insert(pending.begin(), u);
    }
    observed.push_back(theta);
  }
  tr.cum_cost = tr.stage_cost.sum();
  if (include_terminal) {
    z << x, ua_prev;
    tr.terminal_cost = z.dot(plant.terminal * z);
    tr.cum_cost += tr.terminal_cost;
  }
  return tr;
}

}  // namespace

SimulationTrace simulate(const JumpSystem& sys, const PolicySpec& policy, const InitialData& init, int initial_mode,
                         int steps, std::uint64_t seed, bool include_terminal) {
  std::mt19937_64 rng(seed);
  return run_loop(
      sys, init, initial_mode, steps, include_terminal,
      [&](int, int prev) { return sample_next(sys.chain, prev, uniform01(rng())); },
      [&](const DecisionContext& ctx) { return decide(policy, ctx, sys.m()); });
}

SimulationTrace replay(const JumpSystem& sys, const InitialData& init, int initial_mode, const std::vector<int>& modes,
                       const Mat& u_c, bool include_terminal) {
  const int steps = static_cast<int>(modes.size());
  if (u_c.rows() != steps || u_c.cols() != sys.m()) throw ShapeMismatch("recorded controls do not match the mode path");
  return run_loop(
      sys, init, initial_mode, steps, include_terminal, [&](int k, int) { return modes[static_cast<std::size_t>(k)]; },
      [&](const DecisionContext& ctx) -> Vec { return u_c.row(ctx.t).transpose(); });
}

std::uint64_t run_seed(std::uint64_t seed, std::uint64_t run) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (run + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int run_initial_mode(const InitialData& init, std::uint64_t seed, std::uint64_t run) {
  const double u = uniform01(run_seed(seed ^ 0x5bd1e995ULL, run));
  double c = 0.0;
  int last = 0;
  for (Eigen::Index i = 0; i < init.mode_distribution.size(); ++i) {
    if (init.mode_distribution(i) == 0.0) continue;
    last = static_cast<int>(i);
    c += init.mode_distribution(i);
    if (u < c) return last;
  }
  return last;
}

EnsembleStats monte_carlo(const JumpSystem& sys, const PolicySpec& policy, const InitialData& init_in, int steps,
                          int runs, std::uint64_t seed, bool include_terminal) {
  if (runs < 1) throw ShapeMismatch("an ensemble needs at least one run");
  const InitialData init = normalize_initial(sys, init_in);
  EnsembleStats st;
  st.runs = runs;
  st.mean_sq_state = Vec::Zero(steps);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int r = 0; r < runs; ++r) {
    const auto ur = static_cast<std::uint64_t>(r);
    const SimulationTrace tr =
        simulate(sys, policy, init, run_initial_mode(init, seed, ur), steps, run_seed(seed, ur), include_terminal);
    st.mean_sq_state += tr.x.rowwise().squaredNorm();
    sum += tr.cum_cost;
    sum_sq += tr.cum_cost * tr.cum_cost;
  }
  st.mean_sq_state /= runs;
  st.mean_cum_cost = sum / runs;
  if (runs > 1) {
    const double var = std::max(0.0, (sum_sq - runs * st.mean_cum_cost * st.mean_cum_cost) / (runs - 1));
    st.ci95_cum_cost = 1.96 * std::sqrt(var / runs);
  }
  return st;
}

DecayDiagnostic decay_diagnostic(const EnsembleStats& stats, int window, double margin) {
  const auto steps = static_cast<int>(stats.mean_sq_state.size());
  if (window < 2 || steps < 2 * window) {
    throw DegenerateWindow(fmt::format("window {} needs at least {} steps, have {}", window, 2 * window, steps));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (int k = steps - window; k < steps; ++k) {
    const double v = stats.mean_sq_state(k);
    if (!(v > 0.0)) continue;  // exact zeros carry no slope information
    const double y = std::log(v);
    sx += k;
    sy += y;
    sxx += static_cast<double>(k) * k;
    sxy += k * y;
    ++count;
  }
  if (count < 2) throw DegenerateWindow("mean-square state is zero over the trailing window");
  DecayDiagnostic out;
  out.rate = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  out.decaying = out.rate < -margin;
  out.verdict = out.decaying ? "decaying" : "not decaying";
  return out;
}

void write_trace_csv(std::ostream& os, const SimulationTrace& tr, const std::string& header_line) {
  const auto n = tr.x.cols();
  const auto m = tr.u_c.cols();
  os << header_line << '\n' << "k,mode";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u_c" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u_a" << i + 1;
  os << ",stage_cost\n";
  for (Eigen::Index k = 0; k < tr.x.rows(); ++k) {
    os << k << ',' << tr.modes[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << fmt17(tr.x(k, i));
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << fmt17(tr.u_c(k, i));
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << fmt17(tr.u_a(k, i));
    os << ',' << fmt17(tr.stage_cost(k)) << '\n';
  }
}

void write_ensemble_csv(std::ostream& os, const EnsembleStats& st, const std::string& header_line) {
  os << header_line << '\n';
  os << "# runs=" << st.runs << " mean_cum_cost=" << fmt17(st.mean_cum_cost)
     << " ci95_cum_cost=" << fmt17(st.ci95_cum_cost) << '\n';
  os << "k,mean_sq_state\n";
  for (Eigen::Index k = 0; k < st.mean_sq_state.size(); ++k) os << k << ',' << fmt17(st.mean_sq_state(k)) << '\n';
}

}  // namespace ncs
