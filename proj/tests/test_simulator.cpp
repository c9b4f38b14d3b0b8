#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ncs/care_solver.hpp"
#include "ncs/cdre_solver.hpp"
#include "ncs/errors.hpp"
#include "ncs/simulator.hpp"
#include "support.hpp"

using namespace ncs;

namespace {

JumpSystem scalar_system(double a, double b, int d, const Mat& xi) {
  return make_system(make_plant(Mat::Constant(1, 1, a), Mat::Constant(1, 1, b), d, Mat::Identity(2, 2),
                                Mat::Identity(1, 1), Mat::Identity(2, 2)),
                     MarkovChain::validate(xi));
}

Mat mixing_chain() {
  Mat xi(2, 2);
  xi << 0.9, 0.1, 0.3, 0.7;
  return xi;
}

PolicySpec zero_policy() {
  return AdaptedPolicy{[](const DecisionContext&) -> Vec { return Vec::Zero(1); }};
}

EnsembleStats geometric(double ratio, int steps) {
  EnsembleStats st;
  st.runs = 1;
  st.mean_sq_state.resize(steps);
  for (int k = 0; k < steps; ++k) st.mean_sq_state(k) = std::pow(ratio, k);
  return st;
}

}  // namespace

TEST_CASE("without input the state follows the free response") {
  Mat A(2, 2);
  A << 0.9, 0.2, -0.1, 0.8;
  const auto sys = make_system(make_plant(A, Mat::Zero(2, 1), 1, Mat::Identity(3, 3), Mat::Identity(1, 1)),
                               MarkovChain::validate(mixing_chain()));
  InitialData init;
  init.x0 = Vec::Ones(2);
  const PolicySpec pol = AdaptedPolicy{[](const DecisionContext& c) -> Vec { return Vec::Constant(1, 3.0 + c.t); }};
  const auto tr = simulate(sys, pol, init, 0, 12, 5);
  Vec x = init.x0;
  for (int k = 0; k < 12; ++k) {
    CHECK((tr.x.row(k).transpose() - x).cwiseAbs().maxCoeff() <= 1e-14);
    x = A * x;
  }
}

TEST_CASE("a channel stuck in the lost mode holds the actuator") {
  Mat xi = Mat::Zero(2, 2);
  xi.col(0).setOnes();
  const auto sys = scalar_system(0.5, 1.0, 1, xi);
  InitialData init;
  init.x0 = Vec::Constant(1, 1.0);
  init.u_c_history = {Vec::Constant(1, 4.0)};
  init.u_a_prev = Vec::Constant(1, -0.75);
  const PolicySpec pol = AdaptedPolicy{[](const DecisionContext& c) -> Vec { return Vec::Constant(1, c.t + 1.0); }};
  const auto tr = simulate(sys, pol, init, 0, 10, 9);
  for (int k = 0; k < 10; ++k) {
    CHECK(tr.modes[static_cast<std::size_t>(k)] == 0);
    CHECK(tr.u_a(k, 0) == -0.75);
  }
}

TEST_CASE("a channel stuck in the delivered mode applies each control d steps late") {
  Mat xi = Mat::Zero(2, 2);
  xi.col(1).setOnes();
  const auto sys = scalar_system(0.5, 1.0, 2, xi);
  InitialData init;
  init.x0 = Vec::Constant(1, 1.0);
  init.u_c_history = {Vec::Constant(1, 7.0), Vec::Constant(1, 8.0)};  // u_{-2}, u_{-1}
  const PolicySpec pol = AdaptedPolicy{[](const DecisionContext& c) -> Vec { return Vec::Constant(1, c.t + 1.0); }};
  const auto tr = simulate(sys, pol, init, 1, 8, 3);
  CHECK(tr.u_a(0, 0) == 7.0);
  CHECK(tr.u_a(1, 0) == 8.0);
  for (int k = 2; k < 8; ++k) CHECK(tr.u_a(k, 0) == tr.u_c(k - 2, 0));
}

TEST_CASE("replaying a recorded run reproduces it bit for bit") {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = testing::random_instance(rng, 0, 3, 3, 6);
    const auto sol = solve_cdre(inst.sys, inst.horizon);
    const PolicySpec pol = optimal_policy(sol);
    const int mode = static_cast<int>(rng() % static_cast<std::uint64_t>(inst.sys.num_modes()));
    const auto a = simulate(inst.sys, pol, inst.init, mode, inst.horizon + 1, rng(), true);
    const auto b = replay(inst.sys, inst.init, mode, a.modes, a.u_c, true);
    CHECK(a.x == b.x);
    CHECK(a.u_a == b.u_a);
    CHECK(a.stage_cost == b.stage_cost);
    CHECK(a.cum_cost == b.cum_cost);
  }
}

TEST_CASE("the same seed gives the same run, another seed another one") {
  const auto sys = testing::example_system();
  const PolicySpec pol = StationaryPolicy{stationary_gains(solve_care(sys))};
  const auto a = simulate(sys, pol, testing::example_initial(), 0, 40, 123);
  const auto b = simulate(sys, pol, testing::example_initial(), 0, 40, 123);
  const auto c = simulate(sys, pol, testing::example_initial(), 0, 40, 124);
  CHECK(a.modes == b.modes);
  CHECK(a.x == b.x);
  CHECK(a.modes != c.modes);
}

TEST_CASE("recorded stage costs match the trace columns") {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 8; ++trial) {
    const auto inst = testing::random_instance(rng, 0, 3, 3, 6);
    const auto& sys = inst.sys;
    const InitialData init = normalize_initial(sys, inst.init);
    const auto pol = testing::perturbed(optimal_policy(solve_cdre(sys, inst.horizon)), 0.3, rng(), sys.m());
    const auto tr = simulate(sys, pol, init, 0, 9, rng());
    const int d = sys.d();
    double total = 0.0;
    for (int k = 0; k < 9; ++k) {
      Vec z(sys.nz());
      z << tr.x.row(k).transpose(), (k == 0 ? init.u_a_prev : Vec(tr.u_a.row(k - 1).transpose()));
      const Vec u = k >= d ? Vec(tr.u_c.row(k - d).transpose()) : init.u_c_history[static_cast<std::size_t>(k)];
      const double stage = z.dot(sys.plant.Q * z) + u.dot(sys.plant.R * u);
      CHECK(std::abs(stage - tr.stage_cost(k)) <= 1e-12 * std::max(1.0, stage));
      total += stage;
    }
    CHECK(std::abs(total - tr.cum_cost) <= 1e-12 * std::max(1.0, total));
  }
}

TEST_CASE("policies only ever see strictly past modes") {
  const auto sys = testing::example_system();
  std::vector<std::vector<int>> seen;
  const PolicySpec pol = AdaptedPolicy{[&](const DecisionContext& c) -> Vec {
    seen.emplace_back(c.observed_modes.begin(), c.observed_modes.end());
    return Vec::Zero(1);
  }};
  const auto tr = simulate(sys, pol, testing::example_initial(), 1, 15, 77);
  REQUIRE(seen.size() == 15);
  for (int t = 0; t < 15; ++t) {
    const auto& obs = seen[static_cast<std::size_t>(t)];
    REQUIRE(obs.size() == static_cast<std::size_t>(t) + 1);  // theta_{-1}, ..., theta_{t-1}
    CHECK(obs[0] == 1);
    for (int s = 0; s < t; ++s) CHECK(obs[static_cast<std::size_t>(s) + 1] == tr.modes[static_cast<std::size_t>(s)]);
  }
}

TEST_CASE("a one-run ensemble is that run") {
  const auto sys = testing::example_system();
  const PolicySpec pol = StationaryPolicy{stationary_gains(solve_care(sys))};
  const InitialData init = normalize_initial(sys, testing::example_initial());
  const auto st = monte_carlo(sys, pol, init, 30, 1, 42);
  const auto tr = simulate(sys, pol, init, run_initial_mode(init, 42, 0), 30, run_seed(42, 0));
  CHECK(st.mean_sq_state == tr.x.rowwise().squaredNorm());
  CHECK(st.mean_cum_cost == tr.cum_cost);
  CHECK(st.ci95_cum_cost == 0.0);
}

TEST_CASE("initial modes follow the initial distribution") {
  const auto sys = testing::example_system();
  InitialData init = testing::example_initial();
  init.mode_distribution = Vec(2);
  init.mode_distribution << 0.0, 1.0;
  for (std::uint64_t r = 0; r < 100; ++r) CHECK(run_initial_mode(init, 7, r) == 1);
  init.mode_distribution << 0.25, 0.75;
  int zeros = 0;
  for (std::uint64_t r = 0; r < 20000; ++r) zeros += run_initial_mode(init, 7, r) == 0;
  CHECK(std::abs(zeros / 20000.0 - 0.25) < 0.015);
}

TEST_CASE("confidence half-width shrinks like one over root n") {
  const auto sys = scalar_system(0.8, 1.0, 1, mixing_chain());
  const PolicySpec pol = StationaryPolicy{stationary_gains(solve_care(sys))};
  InitialData init;
  init.x0 = Vec::Constant(1, 2.0);
  const double c1 = monte_carlo(sys, pol, init, 20, 1000, 3).ci95_cum_cost;
  const double c4 = monte_carlo(sys, pol, init, 20, 4000, 3).ci95_cum_cost;
  const double c16 = monte_carlo(sys, pol, init, 20, 16000, 3).ci95_cum_cost;
  CHECK(c4 / c1 == doctest::Approx(0.5).epsilon(0.2));
  CHECK(c16 / c4 == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("ensemble cost agrees with the exact expected cost") {
  const auto sys = testing::example_system();
  const int horizon = 8;
  const auto sol = solve_cdre(sys, horizon);
  const InitialData init = testing::example_initial();
  const double exact = finite_cost(sys, sol, init);
  const auto st = monte_carlo(sys, optimal_policy(sol), init, horizon + 1, 4000, 11, true);
  CHECK(std::abs(st.mean_cum_cost - exact) <= 3.0 * st.ci95_cum_cost);
}

TEST_CASE("decay diagnostic") {
  const auto d = decay_diagnostic(geometric(0.5, 40), 10);
  CHECK(d.rate == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(d.decaying);
  CHECK(d.verdict == "decaying");

  CHECK_FALSE(decay_diagnostic(geometric(1.0, 40), 10).decaying);

  const auto sys = scalar_system(2.0, 0.0, 1, mixing_chain());
  InitialData init;
  init.x0 = Vec::Constant(1, 1.0);
  const auto grow = decay_diagnostic(monte_carlo(sys, zero_policy(), init, 30, 20, 1), 10);
  CHECK_FALSE(grow.decaying);
  CHECK(grow.rate == doctest::Approx(std::log(4.0)).epsilon(1e-9));

  CHECK_THROWS_AS(decay_diagnostic(geometric(0.5, 15), 10), DegenerateWindow);
  EnsembleStats zeros;
  zeros.mean_sq_state = Vec::Zero(40);
  CHECK_THROWS_AS(decay_diagnostic(zeros, 10), DegenerateWindow);
}

TEST_CASE("ensemble file layout") {
  std::ostringstream os;
  EnsembleStats st = geometric(0.5, 3);
  st.runs = 7;
  write_ensemble_csv(os, st, "# hdr");
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "# hdr");
  std::getline(is, line);
  CHECK(line.rfind("# runs=7 ", 0) == 0);
  std::getline(is, line);
  CHECK(line == "k,mean_sq_state");
  std::getline(is, line);
  CHECK(line == "0,1");
  std::getline(is, line);
  CHECK(line == "1,0.5");
}
