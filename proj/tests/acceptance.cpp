// Acceptance runner: one PASS/FAIL line per criterion with the measured
// values. `--only N` runs a single criterion. Exit status is 0 only when
// every selected criterion passes.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "ncs/care_solver.hpp"
#include "ncs/cdre_solver.hpp"
#include "ncs/mjls_oracle.hpp"
#include "ncs/simulator.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace ncs;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

Mat row2(double a, double b) {
  Mat m(1, 2);
  m << a, b;
  return m;
}

// Largest per-entry relative deviation.
double entry_rel(const Mat& got, const Mat& want) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < want.size(); ++i) {
    worst = std::max(worst, std::abs(got(i) - want(i)) / std::abs(want(i)));
  }
  return worst;
}

std::string show(const Mat& m) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += fmt::format("{}{:.6g}", j ? ", " : "", m(i, j));
    if (i + 1 < m.rows()) s += "; ";
  }
  return s + "]";
}

// 1. Stationary solution of the scalar example against the printed values.
Outcome care_values() {
  const auto sys = testing::example_system();
  const auto t0 = std::chrono::steady_clock::now();
  const auto sol = solve_care(sys);
  const double secs = seconds_since(t0);
  const auto& s0 = sol.slices[0];
  const auto& s1 = sol.slices[1];
  const double e = std::max({entry_rel(s0.p_bar, mat2(3.7383, 251.49, 251.49, 69116.31)),
                             entry_rel(s1.p_bar, mat2(3.8049, 88.0818, 88.0818, 23233.77)),
                             entry_rel(s0.gamma, Mat::Constant(1, 1, 3006.02)),
                             entry_rel(s1.gamma, Mat::Constant(1, 1, 11877.83)),
                             entry_rel(s0.m[0], row2(55.01, 1383.48)), entry_rel(s1.m[0], row2(107.89, 461.16)),
                             entry_rel(s0.m[1], Mat::Constant(1, 1, -1834.41)),
                             entry_rel(s1.m[1], Mat::Constant(1, 1, -5058.20))});
  return {e <= 1e-3 && secs < 5.0,
          fmt::format("max rel dev {:.3g} (tol 1e-3), {:.3f} s; P0={} P1={} Gamma=({:.6g}, {:.6g}) M0_0={} M0_1={} "
                      "M1=({:.6g}, {:.6g})",
                      e, secs, show(s0.p_bar), show(s1.p_bar), s0.gamma(0, 0), s1.gamma(0, 0), show(s0.m[0]),
                      show(s1.m[0]), s0.m[1](0, 0), s1.m[1](0, 0))};
}

// 2. Stationary gains against the printed coefficients.
Outcome care_gains() {
  const auto gains = stationary_gains(solve_care(testing::example_system()));
  const double want[2][3] = {{0.0183, 0.4602, 0.6102}, {0.0091, 0.0388, 0.4259}};
  double worst = 0.0;
  std::string got;
  for (int i = 0; i < 2; ++i) {
    const auto& g = gains[static_cast<std::size_t>(i)];
    const double have[3] = {g.k0(0, 0), g.k0(0, 1), g.kj[0](0, 0)};
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(have[c] - want[i][c]));
    got += fmt::format(" mode {}: ({:.6g}, {:.6g}, {:.6g})", i, have[0], have[1], have[2]);
  }
  return {worst <= 1e-3, fmt::format("max abs dev {:.3g} (tol 1e-3);{}", worst, got)};
}

// 3. Certificate matrices against the printed, rounded ones.
Outcome certificates() {
  const auto sol = solve_care(testing::example_system());
  // entry path (l0, l1) pairs Gamma(l0) with P(l1)
  auto want = [](int l0, int l1) {
    if (l1 == 0) return mat2(4, 251, 251, 69116);
    return l0 == 0 ? mat2(0.37, 88, 88, 23234) : mat2(3, 88, 88, 23234);
  };
  double worst = 0.0;
  bool all_pd = sol.certificate.stabilizable;
  std::string got;
  for (const auto& e : sol.certificate.entries) {
    worst = std::max(worst, (e.matrix - want(e.path[0], e.path[1])).cwiseAbs().maxCoeff());
    all_pd = all_pd && e.min_eig > 0.0;
    got += fmt::format(" ({},{}): {} min eig {:.4g};", e.path[0], e.path[1], show(e.matrix), e.min_eig);
  }
  return {worst <= 0.5 && all_pd,
          fmt::format("max abs dev {:.4g} (tol 0.5), all positive definite: {};{}", worst, all_pd ? "yes" : "no", got)};
}

// 4. Recursion against the augmented delay-free oracle.
Outcome oracle_equivalence() {
  std::mt19937_64 rng(20240401);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int failed = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const auto inst = testing::random_instance(rng, 1, 3, 3, 12);
    const auto cdre = solve_cdre(inst.sys, inst.horizon);
    const auto aug = delay_free_augment(inst.sys.plant, inst.sys.modes);
    const auto o = solve_augmented_riccati(aug, inst.sys.chain, inst.sys.plant.R, inst.horizon,
                                           embed_terminal(inst.sys.plant.terminal, static_cast<int>(aug.q_big.rows())));
    const auto rep = correspondence_check(cdre, o, inst.sys.nz(), inst.sys.m(), 1e-8);
    worst = std::max(worst, rep.max_rel_diff);
    failed += rep.pass() ? 0 : 1;
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && secs < 60.0,
          fmt::format("25 instances, max rel diff {:.3g} (tol 1e-8), {} failing, {:.2f} s", worst, failed, secs)};
}

// 5. Optimality by exhaustive enumeration.
Outcome enumeration_optimality() {
  std::mt19937_64 rng(20240402);
  double worst_formula = 0.0;
  double min_gap = std::numeric_limits<double>::infinity();
  int beaten = 0;
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = testing::random_instance(rng, 0, 2, 3, 10);
    if (inst.sys.num_modes() == 3) inst.horizon = std::min(inst.horizon, 7);  // keep 3^(N+1) leaves small
    const auto sol = solve_cdre(inst.sys, inst.horizon);
    const PolicySpec opt = optimal_policy(sol);
    const double j_opt = exact_expected_cost(inst.sys, opt, inst.horizon, inst.init);
    const double j_formula = finite_cost(inst.sys, sol, inst.init);
    worst_formula = std::max(worst_formula, std::abs(j_opt - j_formula) / std::max(1.0, std::abs(j_opt)));
    for (int p = 0; p < 50; ++p) {
      const double eps = std::pow(10.0, testing::uniform(rng, -2.0, 0.0));
      const double j = exact_expected_cost(inst.sys, testing::perturbed(opt, eps, rng(), inst.sys.m()), inst.horizon,
                                           inst.init);
      min_gap = std::min(min_gap, (j - j_opt) / std::max(1.0, std::abs(j_opt)));
      beaten += j_opt < j ? 1 : 0;
    }
  }
  return {worst_formula <= 1e-8 && beaten == 500,
          fmt::format("formula vs enumeration max rel {:.3g} (tol 1e-8); optimal strictly cheaper in {}/500 "
                      "perturbations, smallest relative excess {:.3g}",
                      worst_formula, beaten, min_gap)};
}

// 6. Maximum-principle residuals.
Outcome fbsde() {
  std::mt19937_64 rng(20240403);
  double worst_opt = 0.0;
  double least_pert = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = testing::random_instance(rng, 0, 3, 3, 6);
    const auto sol = solve_cdre(inst.sys, inst.horizon);
    const auto opt = fbsde_residual(inst.sys, sol, 3, 1000 + static_cast<std::uint64_t>(trial));
    worst_opt = std::max(worst_opt, opt.max_residual() / opt.scale);
    const PolicySpec off = testing::scaled_gains(optimal_policy(sol), 0.1);
    const auto pert = fbsde_residual(inst.sys, sol, 3, 1000 + static_cast<std::uint64_t>(trial), &off);
    least_pert = std::min(least_pert, pert.max_residual() / pert.scale);
  }
  return {worst_opt <= 1e-8 && least_pert > 1e-4,
          fmt::format("optimal max residual/scale {:.3g} (tol 1e-8); 10%-scaled gains min residual/scale {:.3g} "
                      "(needs > 1e-4)",
                      worst_opt, least_pert)};
}

// 7. Delay-free case against the direct jump-system recursion.
Outcome zero_delay() {
  std::mt19937_64 rng(20240404);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = testing::random_instance(rng, 0, 0, 3, 12);
    const auto cdre = solve_cdre(inst.sys, inst.horizon);
    const auto red = delay_free_reduction(inst.sys, inst.horizon);
    for (int k = 0; k <= inst.horizon; ++k) {
      for (int i = 0; i < inst.sys.num_modes(); ++i) {
        const auto& r = red[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
        const auto& s = cdre.at(k, i);
        worst = std::max({worst, rel_diff(s.p_bar, r.p_bar), rel_diff(s.gamma, r.gamma), rel_diff(s.m[0], r.m0)});
      }
    }
  }
  return {worst <= 1e-10, fmt::format("10 instances, max rel diff {:.3g} (tol 1e-10)", worst)};
}

// 8. Mean-square decay of the example closed loop.
Outcome decay() {
  const auto sys = testing::example_system();
  const auto t0 = std::chrono::steady_clock::now();
  const PolicySpec pol = StationaryPolicy{stationary_gains(solve_care(sys))};
  const auto stats = monte_carlo(sys, pol, testing::example_initial(), 50, 1000, 42);
  const auto diag = decay_diagnostic(stats, 10);
  const double secs = seconds_since(t0);
  return {diag.verdict == "decaying" && secs < 10.0,
          fmt::format("verdict '{}', log-rate {:.4g} per step, E|x|^2: k=0 {:.4g}, k=10 {:.4g}, k=49 {:.4g}; {:.2f} s",
                      diag.verdict, diag.rate, stats.mean_sq_state(0), stats.mean_sq_state(10),
                      stats.mean_sq_state(49), secs)};
}

// 9. Lyapunov function along the enumerated closed loop.
Outcome lyapunov() {
  const auto sys = testing::example_system();
  const auto sol = solve_care(sys);
  const auto L = lyapunov_sequence(sys, sol, testing::example_initial(), 12);
  double worst_rise = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < L.size(); ++k) worst_rise = std::max(worst_rise, L[k] - L[k - 1]);
  return {worst_rise <= 1e-10, fmt::format("k = 1..12: L from {:.6g} to {:.6g}, largest step change {:.4g} (slack 1e-10)",
                                           L.front(), L.back(), worst_rise)};
}

// 10. Byte-identical CLI output across repeated runs.
std::string dir_bytes(const fs::path& dir) {
  std::string all;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    all += f.filename().string() + "\n" + os.str();
  }
  return all;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "ncs_acceptance_determinism";
  fs::remove_all(root);
  const std::string config = std::string(NCS_SOURCE_DIR) + "/configs/example.json";
  const std::vector<std::pair<std::string, std::string>> cmds = {{"synth-finite", "synth-finite"},
                                                                 {"synth-infinite", "synth-infinite"},
                                                                 {"simulate", "simulate --synthesize"},
                                                                 {"verify", "verify"},
                                                                 {"cost", "cost"}};
  std::string bad;
  for (const auto& [name, args] : cmds) {
    std::string runs[2];
    for (int r = 0; r < 2; ++r) {
      const fs::path out = root / fmt::format("{}_{}", name, r);
      fs::create_directories(out);
      const std::string cmd = fmt::format("\"{}\" --config \"{}\" --out \"{}\" {} > \"{}\" 2>&1", NCS_CLI_PATH, config,
                                          out.string(), args, (root / fmt::format("{}_{}.log", name, r)).string());
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) bad += fmt::format(" {} exited abnormally;", name);
      std::ifstream log(root / fmt::format("{}_{}.log", name, r), std::ios::binary);
      std::ostringstream os;
      os << log.rdbuf();
      runs[r] = os.str() + dir_bytes(out);
    }
    if (runs[0] != runs[1]) bad += fmt::format(" {} differs;", name);
  }
  return {bad.empty(), bad.empty() ? "5 subcommands, outputs and console text identical across two runs" : bad};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") only = std::atoi(argv[i + 1]);
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"example stationary solution", care_values},
      {"example stationary gains", care_gains},
      {"example certificates", certificates},
      {"oracle equivalence", oracle_equivalence},
      {"optimality by enumeration", enumeration_optimality},
      {"maximum-principle residuals", fbsde},
      {"zero-delay reduction", zero_delay},
      {"mean-square decay", decay},
      {"Lyapunov monotonicity", lyapunov},
      {"CLI determinism", determinism},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only != 0 && only != id) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    all = all && o.pass;
    std::cout << fmt::format("[{}] {:>2}. {}: {}", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail)
              << std::endl;
  }
  return all ? 0 : 1;
}
