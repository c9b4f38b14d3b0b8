#include "ncs/mjls_oracle.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ncs/errors.hpp"

namespace ncs {

namespace {

struct OracleStep {
  std::vector<Mat> p;
  std::vector<Mat> upsilon;
  std::vector<Mat> m;
};

OracleStep oracle_step(const DelayFreeAugmentation& aug, const MarkovChain& chain, const Mat& R,
                       const std::vector<Mat>& p_next, int t_label) {
  OracleStep out;
  for (int i = 0; i < chain.num_modes(); ++i) {
    const Mat ep = next_expectation(chain, i, [&](int j) -> Mat { return p_next[static_cast<std::size_t>(j)]; });
    const Mat epc = next_expectation(
        chain, i, [&](int j) -> Mat { return p_next[static_cast<std::size_t>(j)] * aug.c[static_cast<std::size_t>(j)]; });
    const Mat cpc = next_expectation(chain, i, [&](int j) -> Mat {
      const Mat& c = aug.c[static_cast<std::size_t>(j)];
      return c.transpose() * p_next[static_cast<std::size_t>(j)] * c;
    });
    Mat u = symmetrize(R + aug.d_in.transpose() * ep * aug.d_in);
    double min_eig = 0.0;
    if (!is_positive_definite(u, &min_eig)) throw UpsilonNotPositiveDefinite(t_label, i, min_eig);
    Mat mm = aug.d_in.transpose() * epc;
    Mat p = symmetrize(aug.q_big + cpc - mm.transpose() * u.llt().solve(mm));
    out.p.push_back(std::move(p));
    out.upsilon.push_back(std::move(u));
    out.m.push_back(std::move(mm));
  }
  return out;
}

}  // namespace

Mat embed_terminal(const Mat& terminal_z, int ny) {
  Mat t = Mat::Zero(ny, ny);
  t.topLeftCorner(terminal_z.rows(), terminal_z.cols()) = terminal_z;
  return t;
}

AugmentedRiccati solve_augmented_riccati(const DelayFreeAugmentation& aug, const MarkovChain& chain, const Mat& R,
                                         int horizon, const Mat& terminal_y) {
  const auto modes = static_cast<std::size_t>(chain.num_modes());
  AugmentedRiccati out;
  out.horizon = horizon;
  out.p_aug.assign(static_cast<std::size_t>(horizon) + 2, {});
  out.upsilon.assign(static_cast<std::size_t>(horizon) + 1, {});
  out.m_aug.assign(static_cast<std::size_t>(horizon) + 1, {});
  out.p_aug[static_cast<std::size_t>(horizon) + 1] = std::vector<Mat>(modes, terminal_y);
  for (int t = horizon; t >= 0; --t) {
    OracleStep s = oracle_step(aug, chain, R, out.p_aug[static_cast<std::size_t>(t) + 1], t);
    out.p_aug[static_cast<std::size_t>(t)] = std::move(s.p);
    out.upsilon[static_cast<std::size_t>(t)] = std::move(s.upsilon);
    out.m_aug[static_cast<std::size_t>(t)] = std::move(s.m);
  }
  return out;
}

StationaryAugmented solve_augmented_riccati_stationary(const DelayFreeAugmentation& aug, const MarkovChain& chain,
                                                       const Mat& R, double tol, int max_iter) {
  const auto ny = aug.q_big.rows();
  std::vector<Mat> p(static_cast<std::size_t>(chain.num_modes()), Mat::Zero(ny, ny));
  for (int it = 1; it <= max_iter; ++it) {
    OracleStep s = oracle_step(aug, chain, R, p, it);
    double diff = 0.0;
    double scale = 1.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      diff = std::max(diff, max_abs(s.p[i] - p[i]));
      scale = std::max(scale, max_abs(s.p[i]));
    }
    if (!std::isfinite(diff)) throw NotConverged(it, diff);
    p = s.p;
    if (diff < tol * scale) return StationaryAugmented{std::move(s.p), std::move(s.upsilon), std::move(s.m), it};
  }
  throw NotConverged(max_iter, std::nan(""));
}

FeedbackGains split_gain(const Mat& upsilon, const Mat& m_aug, int nz, int m, int d) {
  const Mat full = upsilon.llt().solve(m_aug);
  FeedbackGains g;
  g.k0 = full.leftCols(nz);
  for (int j = 1; j <= d; ++j) g.kj.push_back(full.middleCols(nz + (j - 1) * m, m));
  return g;
}

std::vector<FeedbackGains> oracle_gains(const AugmentedRiccati& aug, int t, int nz, int m, int d) {
  if (t < 0 || t > aug.horizon) throw OutOfHorizon(fmt::format("t={} outside [0, {}]", t, aug.horizon));
  std::vector<FeedbackGains> out;
  const auto& ups = aug.upsilon[static_cast<std::size_t>(t)];
  for (std::size_t i = 0; i < ups.size(); ++i) {
    out.push_back(split_gain(ups[i], aug.m_aug[static_cast<std::size_t>(t)][i], nz, m, d));
  }
  return out;
}

CorrespondenceReport correspondence_check(const CdreSolution& cdre, const AugmentedRiccati& aug, int nz, int m,
                                          double tolerance) {
  CorrespondenceReport rep;
  rep.tolerance = tolerance;
  const int d = cdre.delay();
  auto record = [&](int k, int mode, std::string block, const Mat& a, const Mat& b) {
    const double r = rel_diff(a, b);
    rep.max_rel_diff = std::max(rep.max_rel_diff, r);
    if (!(r <= tolerance)) rep.failures.push_back({k, mode, std::move(block), r});
  };
  for (int k = d; k <= cdre.horizon(); ++k) {
    const int t = k - d;
    for (int i = 0; i < cdre.num_modes(); ++i) {
      const ModeSlice& sl = cdre.at(k, i);
      const Mat& py = aug.p_aug[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      record(k, i, "p_bar(1,1)", sl.p_bar, py.topLeftCorner(nz, nz));
      for (int j = 1; j <= d; ++j) {
        record(k, i, fmt::format("f{}(1,{})", j, d + 2 - j), sl.f[static_cast<std::size_t>(j - 1)],
               py.block(0, nz + (d - j) * m, nz, m));
      }
      const Mat& ups = aug.upsilon[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
      record(k, i, "gamma", sl.gamma, ups);
      const FeedbackGains g = split_gain(ups, aug.m_aug[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)], nz, m, d);
      record(k, i, "gain_z", sl.gains.k0, g.k0);
      for (int j = 1; j <= d; ++j) {
        record(k, i, fmt::format("gain_u{}", j), sl.gains.kj[static_cast<std::size_t>(j - 1)],
               g.kj[static_cast<std::size_t>(j - 1)]);
      }
    }
  }
  return rep;
}

std::vector<std::vector<ReductionSlice>> delay_free_reduction(const JumpSystem& sys, int horizon) {
  if (sys.d() != 0) throw DelayNonzero("the delay-free reduction applies only to d = 0");
  const auto modes = static_cast<std::size_t>(sys.num_modes());
  std::vector<std::vector<ReductionSlice>> out(static_cast<std::size_t>(horizon) + 1);
  std::vector<Mat> p_next(modes, sys.plant.terminal);
  for (int k = horizon; k >= 0; --k) {
    std::vector<ReductionSlice> cur;
    for (int i = 0; i < sys.num_modes(); ++i) {
      Mat bpb = Mat::Zero(sys.m(), sys.m());
      Mat bpa = Mat::Zero(sys.m(), sys.nz());
      Mat apa = Mat::Zero(sys.nz(), sys.nz());
      for (int j = 0; j < sys.num_modes(); ++j) {
        const double w = sys.chain.prob(i, j);
        const auto& am = sys.modes[static_cast<std::size_t>(j)];
        const Mat& p = p_next[static_cast<std::size_t>(j)];
        bpb += w * am.b_bar.transpose() * p * am.b_bar;
        bpa += w * am.b_bar.transpose() * p * am.a_bar;
        apa += w * am.a_bar.transpose() * p * am.a_bar;
      }
      ReductionSlice s;
      s.gamma = symmetrize(sys.plant.R + bpb);
      double min_eig = 0.0;
      if (!is_positive_definite(s.gamma, &min_eig)) throw GammaNotPositiveDefinite(k, i, min_eig);
      s.m0 = bpa;
      s.p_bar = symmetrize(sys.plant.Q + apa - bpa.transpose() * s.gamma.llt().solve(bpa));
      cur.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < modes; ++i) p_next[i] = cur[i].p_bar;
    out[static_cast<std::size_t>(k)] = std::move(cur);
  }
  return out;
}

double exact_expected_cost(const JumpSystem& sys, const PolicySpec& policy, int horizon, const InitialData& init_in,
                           std::uint64_t cap) {
  const InitialData init = normalize_initial(sys, init_in);
  double total = 0.0;
  const int steps = horizon + 1;
  enumerate_closed_loop(
      sys, policy, init, steps,
      [&](const LoopState& s, double w, double cost) {
        if (s.t == steps) total += w * (cost + s.z.dot(sys.plant.terminal * s.z));
      },
      cap);
  return total;
}

}  // namespace ncs
