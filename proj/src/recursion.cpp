#include "recursion.hpp"

#include "ncs/errors.hpp"

namespace ncs::detail {

std::vector<Mat> s_tilde_one(const JumpSystem& sys, const std::vector<Mat>& p_next) {
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(sys.num_modes()));
  for (int i = 0; i < sys.num_modes(); ++i) {
    out.push_back(next_expectation(sys.chain, i, [&](int j) -> Mat {
      const auto& am = sys.modes[static_cast<std::size_t>(j)];
      return am.a_bar.transpose() * p_next[static_cast<std::size_t>(j)] * am.b_bar;
    }));
  }
  return out;
}

std::vector<ModeSlice> gamma_m_step(const JumpSystem& sys, const std::vector<Mat>& s1, const std::vector<Mat>& p_next,
                                    const SliceLookup& later, int k_label, std::uint64_t cap) {
  const int d = sys.d();
  const int m = sys.m();
  const int nz = sys.nz();
  const int cols = m + nz + d * m;
  const auto& modes = sys.modes;
  auto abar = [&](int mode) -> const Mat& { return modes[static_cast<std::size_t>(mode)].a_bar; };
  auto bbar = [&](int mode) -> const Mat& { return modes[static_cast<std::size_t>(mode)].b_bar; };

  std::vector<Mat> bpb;
  for (int j = 0; j < sys.num_modes(); ++j) {
    bpb.push_back(bbar(j).transpose() * p_next[static_cast<std::size_t>(j)] * bbar(j));
  }

  // Path layout: path[r + d + 1] is the mode at time k + r, r = -d-1..0;
  // path[0] is the conditioning mode.
  auto integrand = [&](std::span<const int> path) -> Mat {
    auto th = [&](int r) { return path[static_cast<std::size_t>(r + d + 1)]; };
    Mat out = Mat::Zero(m, cols);
    auto gamma = out.leftCols(m);
    auto m0 = out.middleCols(m, nz);
    auto mj = [&](int j) { return out.middleCols(m + nz + (j - 1) * m, m); };

    gamma += bpb[static_cast<std::size_t>(th(0))];

    // back[c] = A(-1) A(-2) ... A(-c)
    std::vector<Mat> back(static_cast<std::size_t>(d) + 1);
    back[0] = Mat::Identity(nz, nz);
    for (int c = 1; c <= d; ++c) back[c] = back[c - 1] * abar(th(-c));
    const Mat s1t = s1[static_cast<std::size_t>(th(-1))].transpose();
    m0 += s1t * back[static_cast<std::size_t>(d)];
    for (int ii = 1; ii <= d; ++ii) mj(ii) += s1t * back[static_cast<std::size_t>(ii - 1)] * bbar(th(-ii));

    // chron = A(-d+a) ... A(-d), grown one factor per a
    Mat chron = Mat::Identity(nz, nz);
    for (int a = 0; a < d; ++a) {
      chron = abar(th(-d + a)) * chron;
      const ModeSlice* sl = later(a + 1, th(-d + a));
      if (sl == nullptr) continue;
      const Mat ma1t = sl->m[static_cast<std::size_t>(a + 1)].transpose();
      gamma -= ma1t * sl->gains.kj[static_cast<std::size_t>(a)];
      const Mat ma1t_k0 = ma1t * sl->gains.k0;
      m0 -= ma1t_k0 * chron;
      for (int ii = 1; ii <= d; ++ii) {
        const int jj = ii + a + 1;
        if (jj <= d) {
          mj(ii) -= ma1t * sl->gains.kj[static_cast<std::size_t>(jj - 1)];
        } else {
          // Extended entry M^jj(k+a+1) = M0 A(-d+a) ... A(-ii+1) B(-ii)
          Mat h = Mat::Identity(nz, nz);
          for (int r = -d + a; r >= -ii + 1; --r) h = h * abar(th(r));
          mj(ii) -= ma1t_k0 * h * bbar(th(-ii));
        }
      }
    }
    return out;
  };

  std::vector<ModeSlice> out(static_cast<std::size_t>(sys.num_modes()));
  for (int i = 0; i < sys.num_modes(); ++i) {
    const Mat packed = path_expectation(sys.chain, i, d + 1, integrand, cap);
    ModeSlice& sl = out[static_cast<std::size_t>(i)];
    sl.gamma = symmetrize(sys.plant.R + packed.leftCols(m));
    double min_eig = 0.0;
    if (!is_positive_definite(sl.gamma, &min_eig)) throw GammaNotPositiveDefinite(k_label, i, min_eig);
    sl.m.resize(static_cast<std::size_t>(d) + 2);
    sl.m[0] = packed.middleCols(m, nz);
    for (int j = 1; j <= d; ++j) sl.m[static_cast<std::size_t>(j)] = packed.middleCols(m + nz + (j - 1) * m, m);
    sl.m[static_cast<std::size_t>(d) + 1] = sl.m[0] * bbar(i);
    Eigen::LLT<Mat> llt(sl.gamma);
    sl.gains.k0 = llt.solve(sl.m[0]);
    sl.gains.kj.clear();
    for (int j = 1; j <= d; ++j) sl.gains.kj.push_back(llt.solve(sl.m[static_cast<std::size_t>(j)]));
  }
  return out;
}

std::vector<Mat> p_bar_step(const JumpSystem& sys, const std::vector<Mat>& p_next, const std::vector<ModeSlice>* at_kd) {
  std::vector<Mat> out;
  for (int i = 0; i < sys.num_modes(); ++i) {
    Mat p = sys.plant.Q + next_expectation(sys.chain, i, [&](int j) -> Mat {
              const Mat& a = sys.modes[static_cast<std::size_t>(j)].a_bar;
              return a.transpose() * p_next[static_cast<std::size_t>(j)] * a;
            });
    if (at_kd != nullptr) {
      const ModeSlice& sl = (*at_kd)[static_cast<std::size_t>(i)];
      p -= sl.m[0].transpose() * sl.gains.k0;
    }
    out.push_back(symmetrize(p));
  }
  return out;
}

void sequences_step(const JumpSystem& sys, std::vector<ModeSlice>& cur, const std::vector<Mat>& s1,
                    const std::vector<ModeSlice>* next, const std::vector<ModeSlice>* at_kd) {
  const int d = sys.d();
  const int nz = sys.nz();
  const int m = sys.m();
  // E_i[A_j' X(k+1, j)] for a per-mode accessor X; zero beyond the horizon.
  auto propagate = [&](int i, auto&& pick) -> Mat {
    if (next == nullptr) return Mat::Zero(nz, m);
    return next_expectation(sys.chain, i, [&](int j) -> Mat {
      return sys.modes[static_cast<std::size_t>(j)].a_bar.transpose() * pick((*next)[static_cast<std::size_t>(j)]);
    });
  };
  for (int i = 0; i < sys.num_modes(); ++i) {
    ModeSlice& sl = cur[static_cast<std::size_t>(i)];
    const ModeSlice* kd = at_kd ? &(*at_kd)[static_cast<std::size_t>(i)] : nullptr;

    sl.s_tilde.assign(static_cast<std::size_t>(d), Mat());
    if (d >= 1) sl.s_tilde[0] = s1[static_cast<std::size_t>(i)];
    for (int j = 2; j <= d; ++j) {
      sl.s_tilde[static_cast<std::size_t>(j - 1)] =
          propagate(i, [&](const ModeSlice& x) -> const Mat& { return x.s_tilde[static_cast<std::size_t>(j - 2)]; });
    }

    sl.f.assign(static_cast<std::size_t>(d) + 2, Mat::Zero(nz, m));
    const Mat fd1 = kd ? Mat(kd->m[0].transpose()) : Mat::Zero(nz, m);
    // correction F^{d+1} Gamma^-1 M^{d+1-j}(k+d) entering F^j
    auto corr = [&](int j) -> Mat {
      if (kd == nullptr) return Mat::Zero(nz, m);
      const int idx = d + 1 - j;
      const Mat& kgain = kd->gains.kj[static_cast<std::size_t>(idx - 1)];
      return fd1 * kgain;
    };
    if (d >= 1) sl.f[0] = s1[static_cast<std::size_t>(i)] - corr(1);
    for (int j = 2; j <= d; ++j) {
      sl.f[static_cast<std::size_t>(j - 1)] =
          propagate(i, [&](const ModeSlice& x) -> const Mat& { return x.f[static_cast<std::size_t>(j - 2)]; }) - corr(j);
    }
    sl.f[static_cast<std::size_t>(d)] = fd1;
    sl.f[static_cast<std::size_t>(d) + 1] =
        propagate(i, [&](const ModeSlice& x) -> const Mat& { return x.f[static_cast<std::size_t>(d)]; });
  }
}

}  // namespace ncs::detail
