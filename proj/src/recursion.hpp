#pragma once

// Shared backward step of the coupled Riccati-type recursion. The finite
// horizon solver feeds it already computed later time slices; the
// stationary solver feeds it the current iterate for every offset.

#include <functional>
#include <vector>

#include "ncs/cdre_solver.hpp"

namespace ncs::detail {

// Slice at time k + offset (offset in 1..d) conditioned on `mode`, or
// nullptr beyond the horizon.
using SliceLookup = std::function<const ModeSlice*(int offset, int mode)>;

// S1(k, i) = E_i[A_j' P(k+1, j) B_j]
std::vector<Mat> s_tilde_one(const JumpSystem& sys, const std::vector<Mat>& p_next);

// Gamma and M^0..M^{d+1} at time k for every conditioning mode, plus the
// gains. Throws GammaNotPositiveDefinite tagged with `k_label`.
std::vector<ModeSlice> gamma_m_step(const JumpSystem& sys, const std::vector<Mat>& s1,
                                    const std::vector<Mat>& p_next, const SliceLookup& later, int k_label,
                                    std::uint64_t cap);

// P(k, i) from P(k+1) and the slices at time k+d (nullptr beyond horizon).
std::vector<Mat> p_bar_step(const JumpSystem& sys, const std::vector<Mat>& p_next,
                            const std::vector<ModeSlice>* at_kd);

// S~^j and F^j at time k. `next` holds the slices at k+1 (nullptr beyond
// the horizon) and `at_kd` those at k+d.
void sequences_step(const JumpSystem& sys, std::vector<ModeSlice>& cur, const std::vector<Mat>& s1,
                    const std::vector<ModeSlice>* next, const std::vector<ModeSlice>* at_kd);

}  // namespace ncs::detail
