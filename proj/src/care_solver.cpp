#include "ncs/care_solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "ncs/errors.hpp"
#include "recursion.hpp"

namespace ncs {

namespace {

std::vector<Mat> p_of(const std::vector<ModeSlice>& slices) {
  std::vector<Mat> p;
  for (const auto& s : slices) p.push_back(s.p_bar);
  return p;
}

// One backward step of the finite-horizon recursion. window[o - 1] holds the
// slices o steps later; missing entries lie beyond the (growing) horizon.
std::vector<ModeSlice> backward_step(const JumpSystem& sys, const std::vector<Mat>& p_next,
                                     const std::deque<std::vector<ModeSlice>>& window, int it, std::uint64_t cap) {
  const int d = sys.d();
  const std::vector<Mat> s1 = detail::s_tilde_one(sys, p_next);
  const detail::SliceLookup later = [&](int offset, int mode) -> const ModeSlice* {
    if (offset > static_cast<int>(window.size())) return nullptr;
    return &window[static_cast<std::size_t>(offset - 1)][static_cast<std::size_t>(mode)];
  };
  std::vector<ModeSlice> nw = detail::gamma_m_step(sys, s1, p_next, later, it, cap);
  const std::vector<ModeSlice>* at_kd =
      d == 0 ? &nw : (static_cast<int>(window.size()) >= d ? &window[static_cast<std::size_t>(d - 1)] : nullptr);
  const std::vector<Mat> p_new = detail::p_bar_step(sys, p_next, at_kd);
  for (std::size_t i = 0; i < nw.size(); ++i) nw[i].p_bar = p_new[i];
  return nw;
}

}  // namespace

std::vector<Mat> stationary_map(const JumpSystem& sys, const std::vector<ModeSlice>& slices, std::uint64_t cap) {
  // every later slice is the stationary one
  const std::deque<std::vector<ModeSlice>> window(static_cast<std::size_t>(sys.d()), slices);
  return p_of(backward_step(sys, p_of(slices), window, 0, cap));
}

// Value iteration: the finite-horizon recursion with zero terminal weight,
// run backward until P stops moving. Starting from zero, the iterates are
// the optimal costs of ever longer horizons, so Gamma stays above R.
CareSolution solve_care(const JumpSystem& sys, double tol, int max_iter, std::uint64_t cap) {
  const int d = sys.d();
  const int nz = sys.nz();
  std::vector<Mat> p_next(static_cast<std::size_t>(sys.num_modes()), Mat::Zero(nz, nz));
  std::deque<std::vector<ModeSlice>> window;
  std::vector<ModeSlice> cur;

  CareSolution sol;
  sol.delay = d;
  for (int it = 1; it <= max_iter; ++it) {
    cur = backward_step(sys, p_next, window, it, cap);
    double diff = 0.0;
    double scale = 1.0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      diff = std::max(diff, max_abs(cur[i].p_bar - p_next[i]));
      scale = std::max(scale, max_abs(cur[i].p_bar));
    }
    p_next = p_of(cur);
    if (d > 0) {
      window.push_front(cur);
      if (static_cast<int>(window.size()) > d) window.pop_back();
    }
    sol.iterations = it;
    sol.residual = diff;
    if (!std::isfinite(diff) || !std::isfinite(scale)) throw NotConverged(it, diff);
    if (diff < tol * scale) {
      sol.converged = true;
      break;
    }
  }
  if (!sol.converged) throw NotConverged(sol.iterations, sol.residual);

  // S~ and F form finite chains of length d + 2 on the converged iterate;
  // d + 2 sweeps settle them exactly.
  const std::vector<Mat> s1 = detail::s_tilde_one(sys, p_of(cur));
  detail::sequences_step(sys, cur, s1, nullptr, &cur);
  for (int sweep = 0; sweep < d + 2; ++sweep) {
    const std::vector<ModeSlice> prev = cur;
    detail::sequences_step(sys, cur, s1, &prev, &prev);
  }
  sol.slices = std::move(cur);
  sol.certificate = stability_certificate(sys, sol);
  return sol;
}

CertificateReport stability_certificate(const JumpSystem& sys, const CareSolution& sol) {
  CertificateReport rep;
  rep.stabilizable = true;
  const int d = sol.delay;
  for (int l0 = 0; l0 < sys.num_modes(); ++l0) {
    for_each_path(sys.chain, l0, d, [&](std::span<const int> path, double) {
      const ModeSlice& last = sol.slices[static_cast<std::size_t>(path.back())];
      Mat c = last.p_bar;
      for (int s = 0; s < d; ++s) {
        const Mat& f = last.f[static_cast<std::size_t>(s)];
        const Mat& g = sol.slices[static_cast<std::size_t>(path[static_cast<std::size_t>(s)])].gamma;
        c -= f * g.llt().solve(f.transpose());
      }
      CertificateEntry e;
      e.path.assign(path.begin(), path.end());
      e.matrix = symmetrize(c);
      e.min_eig = min_eigenvalue(e.matrix);
      if (!is_positive_definite(e.matrix)) rep.stabilizable = false;
      rep.entries.push_back(std::move(e));
    });
  }
  return rep;
}

std::vector<FeedbackGains> stationary_gains(const CareSolution& sol) {
  if (!sol.converged) throw NotConverged(sol.iterations, sol.residual);
  std::vector<FeedbackGains> out;
  for (const auto& s : sol.slices) out.push_back(s.gains);
  return out;
}

Vec stationary_costate(const CareSolution& sol, const LoopState& s) {
  const int d = sol.delay;
  const ModeSlice& sl = sol.slices[static_cast<std::size_t>(s.observed.back())];
  Vec lam = sl.p_bar * s.z;
  for (int j = 1; j <= d; ++j) {
    lam.noalias() += sl.f[static_cast<std::size_t>(j - 1)] * s.pending[static_cast<std::size_t>(d - j)];
  }
  return lam;
}

double infinite_cost(const JumpSystem& sys, const CareSolution& sol, const InitialData& init_in) {
  if (!sol.certificate.stabilizable) {
    throw Unstable("the stationary solution has no stabilizability certificate; the cost may be infinite");
  }
  const InitialData init = normalize_initial(sys, init_in);
  const int d = sys.d();
  const PolicySpec policy = StationaryPolicy{stationary_gains(sol)};
  double total = 0.0;
  enumerate_closed_loop(
      sys, policy, init, d,
      [&](const LoopState& s, double w, double cost) {
        if (s.t == d) total += w * (cost + s.z.dot(stationary_costate(sol, s)));
      },
      kDefaultPathCap);
  return total;
}

std::vector<double> lyapunov_sequence(const JumpSystem& sys, const CareSolution& sol, const InitialData& init_in,
                                      int k_max, std::uint64_t cap) {
  const InitialData init = normalize_initial(sys, init_in);
  const int d = sys.d();
  std::vector<double> out(static_cast<std::size_t>(std::max(k_max - d + 1, 0)), 0.0);
  const PolicySpec policy = StationaryPolicy{stationary_gains(sol)};
  enumerate_closed_loop(
      sys, policy, init, k_max,
      [&](const LoopState& s, double w, double) {
        if (s.t >= d) out[static_cast<std::size_t>(s.t - d)] += w * s.z.dot(stationary_costate(sol, s));
      },
      cap);
  return out;
}

}  // namespace ncs
