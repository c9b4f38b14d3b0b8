// Command-line front end: synthesis, certification, simulation,
// verification and cost evaluation from one JSON config.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "ncs/care_solver.hpp"
#include "ncs/cdre_solver.hpp"
#include "ncs/config.hpp"
#include "ncs/errors.hpp"
#include "ncs/mjls_oracle.hpp"
#include "ncs/serialize.hpp"
#include "ncs/simulator.hpp"

namespace {

using namespace ncs;

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kGammaIndefinite = 2,
  kCertificateFailed = 3,
  kNotConverged = 4,
  kPathExplosion = 5,
};

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format;
  std::string gains;
  std::string solution;
  bool synthesize = false;
};

struct Context {
  RunConfig cfg;
  std::filesystem::path dir;
  std::string header;
  std::string ext;
};

Context make_context(const Options& o) {
  RunConfig cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.format.empty()) cfg.format = o.format == "json" ? Format::Json : Format::Csv;
  if (!o.out.empty()) cfg.out_dir = o.out;
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
  std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  std::string header = fmt::format("{} seed={}", header_line(cfg.hash), cfg.seed);
  std::string ext = cfg.format == Format::Json ? "json" : "csv";
  return Context{std::move(cfg), std::move(dir), std::move(header), std::move(ext)};
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", p.string()));
  out << content;
}

void write_records_file(const Context& c, const std::string& stem, const std::vector<ArrayRecord>& recs) {
  std::ostringstream ss;
  write_records(ss, recs, c.cfg.format, c.header);
  write_file(c.dir / (stem + "." + c.ext), ss.str());
}

int require_horizon(const RunConfig& cfg) {
  if (!cfg.horizon) throw ConfigError("solver.N", "required for this subcommand");
  return *cfg.horizon;
}

std::string matrix_text(const Mat& m, std::string (*num)(double)) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += (j ? ", " : "") + num(m(i, j));
    if (i + 1 < m.rows()) s += "; ";
  }
  return s + "]";
}

void print_gains(const std::vector<FeedbackGains>& gains) {
  for (std::size_t i = 0; i < gains.size(); ++i) {
    std::cout << fmt::format("  mode {}: k0 = {}", i, matrix_text(gains[i].k0, fmt6));
    for (std::size_t j = 0; j < gains[i].kj.size(); ++j) {
      std::cout << fmt::format(", k{} = {}", j + 1, matrix_text(gains[i].kj[j], fmt6));
    }
    std::cout << '\n';
  }
}

int cmd_synth_finite(const Options& o) {
  Context c = make_context(o);
  const int horizon = require_horizon(c.cfg);
  const JumpSystem& sys = c.cfg.system;
  const CdreSolution sol = solve_cdre(sys, horizon);
  const double cost = finite_cost(sys, sol, c.cfg.initial);
  write_records_file(c, "cdre_solution", solution_records(sol));
  write_records_file(c, "gains_finite", gain_records(sol));
  write_file(c.dir / "synth_finite.txt",
             fmt::format("{}\nhorizon: {}\ndelay: {}\nmodes: {}\nfinite_cost: {}\n", c.header, horizon, sys.d(),
                         sys.num_modes(), fmt17(cost)));
  std::cout << fmt::format("finite horizon N={} d={} modes={}\n", horizon, sys.d(), sys.num_modes());
  std::cout << fmt::format("gains at k={}:\n", sys.d());
  print_gains(feedback_gains(sol, sys.d()));
  std::cout << fmt::format("optimal cost: {}\n", fmt6(cost));
  return kOk;
}

int cmd_synth_infinite(const Options& o) {
  Context c = make_context(o);
  const JumpSystem& sys = c.cfg.system;
  std::cerr << "note: convergence assumes the weighted system is exactly observable; this is not checked\n";
  const CareSolution sol = solve_care(sys, c.cfg.tol, c.cfg.max_iter);
  write_records_file(c, "care_solution", solution_records(sol));
  write_records_file(c, "gains_stationary", gain_records(sol));

  std::string cost_line;
  if (sol.certificate.stabilizable) {
    cost_line = fmt17(infinite_cost(sys, sol, c.cfg.initial));
  } else {
    cost_line = "unavailable (not stabilizable)";
  }
  std::string report = fmt::format("{}\nconverged: true\niterations: {}\nresidual: {}\nstabilizable: {}\n", c.header,
                                   sol.iterations, fmt17(sol.residual), sol.certificate.stabilizable);
  for (const auto& e : sol.certificate.entries) {
    std::string path;
    for (std::size_t s = 0; s < e.path.size(); ++s) path += (s ? "," : "") + std::to_string(e.path[s]);
    report += fmt::format("certificate[{}].min_eig: {}\ncertificate[{}].matrix: {}\n", path, fmt17(e.min_eig), path,
                          matrix_text(e.matrix, fmt17));
  }
  report += fmt::format("infinite_cost: {}\n", cost_line);
  write_file(c.dir / "certificate.txt", report);

  std::cout << fmt::format("stationary solution after {} iterations\n", sol.iterations);
  for (std::size_t i = 0; i < sol.slices.size(); ++i) {
    const auto& s = sol.slices[i];
    std::cout << fmt::format("  mode {}: P = {}, Gamma = {}\n", i, matrix_text(s.p_bar, fmt6), matrix_text(s.gamma, fmt6));
  }
  std::cout << "stationary gains:\n";
  print_gains(stationary_gains(sol));
  std::cout << fmt::format("verdict: {}\n", sol.certificate.stabilizable ? "mean-square stabilizable" : "not mean-square stabilizable");
  if (sol.certificate.stabilizable) std::cout << fmt::format("infinite-horizon cost: {}\n", fmt6(std::stod(cost_line)));
  return sol.certificate.stabilizable ? kOk : kCertificateFailed;
}

int cmd_simulate(const Options& o) {
  Context c = make_context(o);
  const JumpSystem& sys = c.cfg.system;
  PolicySpec policy;
  if (!o.gains.empty()) {
    std::ifstream in(o.gains, std::ios::binary);
    if (!in) {
      std::cerr << fmt::format("error: cannot read gains file '{}'\n", o.gains);
      return kFailure;
    }
    policy = policy_from_gain_records(read_records(in), sys.d(), sys.num_modes());
  } else if (o.synthesize) {
    policy = StationaryPolicy{stationary_gains(solve_care(sys, c.cfg.tol, c.cfg.max_iter))};
  } else {
    std::cerr << "error: no gains; pass --gains <file> or --synthesize\n";
    return kFailure;
  }
  const RunConfig& cfg = c.cfg;
  const SimulationTrace trace = simulate(sys, policy, cfg.initial, run_initial_mode(cfg.initial, cfg.seed, 0),
                                         cfg.sim_steps, run_seed(cfg.seed, 0), cfg.include_terminal);
  const EnsembleStats stats =
      monte_carlo(sys, policy, cfg.initial, cfg.sim_steps, cfg.sim_runs, cfg.seed, cfg.include_terminal);
  std::ostringstream t, e;
  write_trace_csv(t, trace, c.header);
  write_ensemble_csv(e, stats, c.header);
  write_file(c.dir / "trace.csv", t.str());
  write_file(c.dir / "ensemble.csv", e.str());

  std::string verdict;
  std::string rate = "nan";
  try {
    const DecayDiagnostic diag = decay_diagnostic(stats, cfg.window);
    verdict = diag.verdict;
    rate = fmt17(diag.rate);
    std::cout << fmt::format("decay verdict: {} (rate {} per step over the last {} steps)\n", diag.verdict,
                             fmt6(diag.rate), cfg.window);
  } catch (const DegenerateWindow& err) {
    verdict = "undetermined";
    std::cout << fmt::format("decay verdict: undetermined ({})\n", err.what());
  }
  write_file(c.dir / "decay.txt", fmt::format("{}\nruns: {}\nsteps: {}\nwindow: {}\nrate: {}\nverdict: {}\n", c.header,
                                              cfg.sim_runs, cfg.sim_steps, cfg.window, rate, verdict));
  std::cout << fmt::format("mean cost over {} runs: {} +/- {}\n", cfg.sim_runs, fmt6(stats.mean_cum_cost),
                           fmt6(stats.ci95_cum_cost));
  return kOk;
}

struct CheckRow {
  std::string name;
  double value;
  double tolerance;
  bool pass;
};

int cmd_verify(const Options& o) {
  Context c = make_context(o);
  const JumpSystem& sys = c.cfg.system;
  const int horizon = require_horizon(c.cfg);
  const std::uint64_t cap = c.cfg.enumeration_cap;
  const int nz = sys.nz();
  const int m = sys.m();
  const int d = sys.d();
  std::vector<CheckRow> rows;
  std::vector<std::string> notes;

  const CdreSolution sol = solve_cdre(sys, horizon);

  // Oracle comparison: the augmented recursion for d >= 1, the direct
  // delay-free recursion for d = 0.
  auto oracle_compare = [&](const CdreSolution& cand, const std::string& name) {
    if (d >= 1) {
      const auto aug = delay_free_augment(sys.plant, sys.modes);
      const AugmentedRiccati ar =
          solve_augmented_riccati(aug, sys.chain, sys.plant.R, horizon, embed_terminal(sys.plant.terminal, aug.q_big.rows()));
      const CorrespondenceReport rep = correspondence_check(cand, ar, nz, m);
      rows.push_back({name, rep.max_rel_diff, rep.tolerance, rep.pass()});
      for (std::size_t i = 0; i < rep.failures.size() && i < 5; ++i) {
        const auto& f = rep.failures[i];
        notes.push_back(fmt::format("{}: block {} differs at k={} mode={} (relative {})", name, f.block, f.k, f.mode,
                                    fmt6(f.rel_diff)));
      }
    } else {
      const auto red = delay_free_reduction(sys, horizon);
      double worst = 0.0;
      for (int k = 0; k <= horizon; ++k) {
        for (int i = 0; i < sys.num_modes(); ++i) {
          const auto& r = red[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
          const ModeSlice& s = cand.at(k, i);
          const double diff = std::max({rel_diff(s.p_bar, r.p_bar), rel_diff(s.gamma, r.gamma), rel_diff(s.m[0], r.m0)});
          if (diff > 1e-10 && worst <= 1e-10) {
            notes.push_back(fmt::format("{}: differs at k={} mode={} (relative {})", name, k, i, fmt6(diff)));
          }
          worst = std::max(worst, diff);
        }
      }
      rows.push_back({name, worst, 1e-10, worst <= 1e-10});
    }
  };

  oracle_compare(sol, d >= 1 ? "oracle_correspondence" : "delay_free_reduction");

  const FbsdeReport fb = fbsde_residual(sys, sol, 3, c.cfg.seed, nullptr, cap);
  const double fb_rel = fb.scale > 0 ? fb.max_residual() / fb.scale : fb.max_residual();
  rows.push_back({"fbsde_residual", fb_rel, 1e-8, fb_rel <= 1e-8});

  const double formula = finite_cost(sys, sol, c.cfg.initial);
  const double enumerated = exact_expected_cost(sys, optimal_policy(sol), horizon, c.cfg.initial, cap);
  const double cost_rel = std::abs(formula - enumerated) / std::max(1.0, std::abs(enumerated));
  rows.push_back({"cost_formula_vs_enumeration", cost_rel, 1e-8, cost_rel <= 1e-8});

  if (!o.solution.empty()) {
    std::ifstream in(o.solution, std::ios::binary);
    bool loaded = false;
    if (in) {
      try {
        const CdreSolution file_sol = cdre_from_records(read_records(in), d, sys.num_modes(), sys.plant.terminal);
        if (file_sol.horizon() != horizon) throw ShapeMismatch("solution horizon differs from solver.N");
        loaded = true;
        oracle_compare(file_sol, "solution_file");
      } catch (const Error& e) {
        notes.push_back(fmt::format("solution_file: {}", e.what()));
      } catch (const std::exception& e) {
        notes.push_back(fmt::format("solution_file: unreadable ({})", e.what()));
      }
    } else {
      notes.push_back(fmt::format("solution_file: cannot read '{}'", o.solution));
    }
    if (!loaded) rows.push_back({"solution_file", std::nan(""), 1e-8, false});
  }

  bool all = true;
  std::string table = fmt::format("{:<30} {:>14} {:>10}  {}\n", "check", "value", "tolerance", "result");
  for (const auto& r : rows) {
    all = all && r.pass;
    table += fmt::format("{:<30} {:>14} {:>10}  {}\n", r.name, fmt6(r.value), fmt6(r.tolerance), r.pass ? "PASS" : "FAIL");
  }
  for (const auto& n : notes) table += "note: " + n + "\n";
  std::cout << table;
  write_file(c.dir / "verify_report.txt", c.header + "\n" + table);
  return all ? kOk : kFailure;
}

int cmd_cost(const Options& o) {
  Context c = make_context(o);
  const JumpSystem& sys = c.cfg.system;
  std::string report = c.header + "\n";
  if (c.cfg.horizon) {
    const int horizon = *c.cfg.horizon;
    const CdreSolution sol = solve_cdre(sys, horizon);
    const double fc = finite_cost(sys, sol, c.cfg.initial);
    report += fmt::format("horizon: {}\nfinite_cost: {}\n", horizon, fmt17(fc));
    std::cout << fmt::format("finite-horizon optimal cost (N={}): {}\n", horizon, fmt6(fc));
    try {
      const double ec = exact_expected_cost(sys, optimal_policy(sol), horizon, c.cfg.initial, c.cfg.enumeration_cap);
      report += fmt::format("enumerated_cost: {}\n", fmt17(ec));
      std::cout << fmt::format("enumerated expected cost: {}\n", fmt6(ec));
    } catch (const PathExplosion&) {
      report += "enumerated_cost: skipped (above enumeration cap)\n";
      std::cout << "enumerated expected cost: skipped (above enumeration cap)\n";
    }
  }
  try {
    const CareSolution care = solve_care(sys, c.cfg.tol, c.cfg.max_iter);
    if (care.certificate.stabilizable) {
      const double ic = infinite_cost(sys, care, c.cfg.initial);
      report += fmt::format("infinite_cost: {}\n", fmt17(ic));
      std::cout << fmt::format("infinite-horizon optimal cost: {}\n", fmt6(ic));
    } else {
      report += "infinite_cost: unavailable (not stabilizable)\n";
      std::cout << "infinite-horizon optimal cost: unavailable (not stabilizable)\n";
    }
  } catch (const NotConverged& e) {
    report += "infinite_cost: unavailable (stationary iteration did not converge)\n";
    std::cout << fmt::format("infinite-horizon optimal cost: unavailable ({})\n", e.what());
  }
  write_file(c.dir / "cost.txt", report);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal control toolkit for networked systems with delay and packet loss"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "JSON run configuration")->required();
  app.add_option("--out", o.out, "output directory (overrides output.directory)");
  app.add_option("--seed", o.seed, "random seed (overrides sim.seed)");
  app.add_option("--format", o.format, "solution file format")->check(CLI::IsMember({"csv", "json"}));

  auto* finite = app.add_subcommand("synth-finite", "solve the finite-horizon problem and write gains");
  auto* infinite = app.add_subcommand("synth-infinite", "solve the stationary problem and certify it");
  auto* sim = app.add_subcommand("simulate", "Monte Carlo closed-loop simulation");
  sim->add_option("--gains", o.gains, "gain file written by synth-finite or synth-infinite");
  sim->add_flag("--synthesize", o.synthesize, "compute stationary gains first");
  auto* verify = app.add_subcommand("verify", "cross-check the solver against independent oracles");
  verify->add_option("--solution", o.solution, "finite-horizon solution file to check");
  auto* cost = app.add_subcommand("cost", "evaluate optimal costs for the configured initial data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kFailure;
  }

  try {
    if (*finite) return cmd_synth_finite(o);
    if (*infinite) return cmd_synth_infinite(o);
    if (*sim) return cmd_simulate(o);
    if (*verify) return cmd_verify(o);
    if (*cost) return cmd_cost(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const GammaNotPositiveDefinite& e) {
    std::cerr << fmt::format("error: Gamma not positive definite at k={} mode={} (min eigenvalue {})\n", e.k, e.mode,
                             fmt6(e.min_eig));
    return kGammaIndefinite;
  } catch (const NotConverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNotConverged;
  } catch (const PathExplosion& e) {
    std::cerr << "error: " << e.what() << " (try a smaller solver.N)\n";
    return kPathExplosion;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
