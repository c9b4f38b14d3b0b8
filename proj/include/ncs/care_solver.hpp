#pragma once

#include <cstdint>
#include <vector>

#include "ncs/cdre_solver.hpp"
#include "ncs/linalg.hpp"
#include "ncs/plant_model.hpp"
#include "ncs/policy.hpp"

namespace ncs {

struct CertificateEntry {
  std::vector<int> path;  // l_0, ..., l_d
  Mat matrix;             // P(l_d) - sum_s F^{s+1}(l_d) Gamma(l_s)^-1 F^{s+1}(l_d)'
  double min_eig = 0.0;
};

struct CertificateReport {
  std::vector<CertificateEntry> entries;
  bool stabilizable = false;
};

struct CareSolution {
  int delay = 0;
  std::vector<ModeSlice> slices;  // one per mode, same layout as the finite-horizon cells
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  CertificateReport certificate;
};

// Value iteration of the time-invariant recursion from P = 0, M = 0 until
// successive P iterates differ by less than tol * max(1, |P|) in max-norm.
// Throws NotConverged on divergence or when max_iter is reached.
CareSolution solve_care(const JumpSystem& sys, double tol = 1e-10, int max_iter = 100000,
                        std::uint64_t cap = kDefaultPathCap);

// One application of the stationary map to the P iterate of `slices`.
std::vector<Mat> stationary_map(const JumpSystem& sys, const std::vector<ModeSlice>& slices,
                                std::uint64_t cap = kDefaultPathCap);

// Certificate over every reachable mode path l_0..l_d; stabilizable iff all
// matrices are positive definite.
CertificateReport stability_certificate(const JumpSystem& sys, const CareSolution& sol);

std::vector<FeedbackGains> stationary_gains(const CareSolution& sol);

// Costate lambda_{k-1} of the stationary solution at state `s`.
Vec stationary_costate(const CareSolution& sol, const LoopState& s);

// Optimal infinite-horizon cost; throws Unstable without a certificate.
double infinite_cost(const JumpSystem& sys, const CareSolution& sol, const InitialData& init);

// L(k) = E[z_k' lambda_{k-1}] under the stationary policy for k = d..k_max,
// by exhaustive enumeration.
std::vector<double> lyapunov_sequence(const JumpSystem& sys, const CareSolution& sol, const InitialData& init,
                                      int k_max, std::uint64_t cap = kDefaultPathCap);

}  // namespace ncs
