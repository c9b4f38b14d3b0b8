#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncs/cdre_solver.hpp"
#include "ncs/linalg.hpp"
#include "ncs/markov_chain.hpp"
#include "ncs/plant_model.hpp"
#include "ncs/policy.hpp"

namespace ncs {

inline constexpr std::uint64_t kOracleCap = std::uint64_t{1} << 22;

// Riccati recursion of the delay-free system on Y_t. Indices are Y-time t;
// the quantities at t govern the decision u^c_t.
struct AugmentedRiccati {
  int horizon = 0;
  std::vector<std::vector<Mat>> p_aug;    // t = 0..N+1
  std::vector<std::vector<Mat>> upsilon;  // t = 0..N
  std::vector<std::vector<Mat>> m_aug;    // t = 0..N
};

// Standard coupled recursion
//   P(t,i) = Qy + E_i[C' P(t+1) C] - M' U^-1 M,
//   U(t,i) = R + D' E_i[P(t+1)] D,  M(t,i) = D' E_i[P(t+1) C].
AugmentedRiccati solve_augmented_riccati(const DelayFreeAugmentation& aug, const MarkovChain& chain, const Mat& R,
                                         int horizon, const Mat& terminal_y);

// Embeds a weight on z in the top-left block of a Y-sized zero matrix.
Mat embed_terminal(const Mat& terminal_z, int ny);

struct StationaryAugmented {
  std::vector<Mat> p_aug;
  std::vector<Mat> upsilon;
  std::vector<Mat> m_aug;
  int iterations = 0;
};

// Same recursion iterated from zero to a fixed point (relative max-norm tol).
StationaryAugmented solve_augmented_riccati_stationary(const DelayFreeAugmentation& aug, const MarkovChain& chain,
                                                       const Mat& R, double tol, int max_iter);

// Splits U^-1 M on Y = [z; u_{t-1}; ...; u_{t-d}] into gains on z and on
// each past control.
FeedbackGains split_gain(const Mat& upsilon, const Mat& m_aug, int nz, int m, int d);

// Per-mode gains for decision time t.
std::vector<FeedbackGains> oracle_gains(const AugmentedRiccati& aug, int t, int nz, int m, int d);

struct CorrespondenceEntry {
  int k;
  int mode;
  std::string block;
  double rel_diff;
};

struct CorrespondenceReport {
  double tolerance = 1e-8;
  double max_rel_diff = 0.0;
  std::vector<CorrespondenceEntry> failures;
  bool pass() const { return failures.empty(); }
};

// Compares P, Gamma, the gains and the F sequence of the coupled solution
// with the blocks of the augmented recursion at every (k, mode).
CorrespondenceReport correspondence_check(const CdreSolution& cdre, const AugmentedRiccati& aug, int nz, int m,
                                          double tolerance = 1e-8);

struct ReductionSlice {
  Mat p_bar;
  Mat gamma;
  Mat m0;
};

// Delay-free (d = 0) coupled recursion written out directly:
//   Gamma = R + E[B'PB], M0 = E[B'PA], P = Q + E[A'PA] - M0' Gamma^-1 M0.
// Result indexed [k][mode] for k = 0..N.
std::vector<std::vector<ReductionSlice>> delay_free_reduction(const JumpSystem& sys, int horizon);

// Exact expected cost of `policy` over steps 0..N plus the terminal term,
// by enumerating every mode path.
double exact_expected_cost(const JumpSystem& sys, const PolicySpec& policy, int horizon, const InitialData& init,
                           std::uint64_t cap = kOracleCap);

}  // namespace ncs
