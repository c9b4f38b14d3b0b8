#pragma once

#include <cstdint>
#include <vector>

#include "ncs/linalg.hpp"
#include "ncs/plant_model.hpp"
#include "ncs/policy.hpp"

namespace ncs {

// All quantities of one (time, mode) cell of the coupled recursion.
//  p_bar, s_tilde, f: conditioned on theta_{k-1}
//  gamma, m, gains:   conditioned on theta_{k-d-1}
struct ModeSlice {
  Mat p_bar;                 // nz x nz
  Mat gamma;                 // m x m
  std::vector<Mat> m;        // m[0]: m x nz; m[j], j = 1..d+1: m x m
  std::vector<Mat> s_tilde;  // s_tilde[j-1], j = 1..d: nz x m
  std::vector<Mat> f;        // f[j-1], j = 1..d+2: nz x m
  FeedbackGains gains;       // k0 = gamma^-1 m[0], kj[j-1] = gamma^-1 m[j]
};

class CdreSolution {
 public:
  CdreSolution(int horizon, int delay, Mat terminal, std::vector<std::vector<ModeSlice>> slices);

  int horizon() const { return horizon_; }
  int delay() const { return delay_; }
  int num_modes() const { return slices_.empty() ? 0 : static_cast<int>(slices_.front().size()); }

  // k in [d, N]; throws OutOfHorizon otherwise.
  const ModeSlice& at(int k, int mode) const;
  // k in [d, N+1]; P(N+1) is the terminal weight.
  const Mat& p_bar(int k, int mode) const;
  const Mat& terminal() const { return terminal_; }
  bool in_horizon(int k) const { return k >= delay_ && k <= horizon_; }

 private:
  int horizon_;
  int delay_;
  Mat terminal_;
  std::vector<std::vector<ModeSlice>> slices_;  // [k - d][mode]
};

CdreSolution solve_cdre(const JumpSystem& sys, int horizon, std::uint64_t cap = kDefaultPathCap);

// Gains for the decision u^c_{k-d}, indexed by theta_{k-d-1}.
std::vector<FeedbackGains> feedback_gains(const CdreSolution& sol, int k);

// The Theorem-1 policy as a PolicySpec.
TimeVaryingPolicy optimal_policy(const CdreSolution& sol);

// Costate lambda_{k-1} = P(k) z_k + sum_j F^j(k) u^c_{k-d-1+j} for the
// state `s` at step k, conditioned on its last observed mode.
Vec costate(const CdreSolution& sol, const LoopState& s);

// Optimal expected cost for the given initial data.
double finite_cost(const JumpSystem& sys, const CdreSolution& sol, const InitialData& init);

struct FbsdeReport {
  double stationarity = 0.0;  // max |E[B' lambda_k] + R u^c_{k-d}|
  double costate = 0.0;       // max |lambda_{k-1} - Q z_k - E[A' lambda_k]|
  double scale = 0.0;         // max of the magnitudes of the terms involved
  double max_residual() const { return stationarity > costate ? stationarity : costate; }
};

// Checks both optimality conditions along every enumerated trajectory of
// `policy` (the optimal one unless overridden) from `trials` random initial
// states drawn from `seed`.
FbsdeReport fbsde_residual(const JumpSystem& sys, const CdreSolution& sol, int trials, std::uint64_t seed,
                           const PolicySpec* policy = nullptr, std::uint64_t cap = kDefaultPathCap);

}  // namespace ncs
