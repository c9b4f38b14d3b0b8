#include "ncs/plant_model.hpp"

#include <fmt/format.h>

#include "ncs/errors.hpp"

namespace ncs {

namespace {

Mat checked_symmetric(const Mat& w, const char* name, std::vector<std::string>* warnings) {
  const double asym = max_abs(w - w.transpose());
  if (asym > 1e-9 && warnings) {
    warnings->push_back(fmt::format("{} is not symmetric (max asymmetry {:.3g}); using (X+X')/2", name, asym));
  }
  return symmetrize(w);
}

void require_shape(const Mat& w, Eigen::Index r, Eigen::Index c, const char* name) {
  if (w.rows() != r || w.cols() != c) {
    throw DimensionMismatch(fmt::format("{} must be {}x{}, got {}x{}", name, r, c, w.rows(), w.cols()));
  }
}

}  // namespace

PlantModel make_plant(Mat A, Mat B, int d, Mat Q, Mat R, Mat terminal, std::vector<std::string>* warnings) {
  if (A.rows() == 0 || A.rows() != A.cols()) throw DimensionMismatch("A must be square and non-empty");
  if (B.rows() != A.rows() || B.cols() == 0) throw DimensionMismatch("B must have as many rows as A and at least one column");
  if (d < 0) throw DimensionMismatch("delay d must be non-negative");
  const Eigen::Index nz = A.rows() + B.cols();
  require_shape(Q, nz, nz, "Q");
  require_shape(R, B.cols(), B.cols(), "R");
  if (terminal.size() == 0) terminal = Mat::Zero(nz, nz);
  require_shape(terminal, nz, nz, "terminal_weight");

  PlantModel p;
  p.A = std::move(A);
  p.B = std::move(B);
  p.d = d;
  p.Q = checked_symmetric(Q, "Q", warnings);
  p.R = checked_symmetric(R, "R", warnings);
  p.terminal = checked_symmetric(terminal, "terminal_weight", warnings);

  const auto psd_tol = [](const Mat& w) { return -1e-10 * std::max(1.0, spectral_norm_sym(w)); };
  if (min_eigenvalue(p.Q) < psd_tol(p.Q)) throw InvalidWeight("Q must be positive semi-definite");
  if (min_eigenvalue(p.terminal) < psd_tol(p.terminal)) {
    throw InvalidWeight("terminal_weight must be positive semi-definite");
  }
  if (!is_positive_definite(p.R)) throw InvalidWeight("R must be positive definite");
  return p;
}

std::vector<int> default_delivery_flags(int num_modes) {
  std::vector<int> f(static_cast<std::size_t>(num_modes), 1);
  if (num_modes > 0) f[0] = 0;
  return f;
}

std::vector<AugmentedMode> augment(const PlantModel& plant, int num_modes, const std::vector<int>& flags_in) {
  const std::vector<int> flags = flags_in.empty() ? default_delivery_flags(num_modes) : flags_in;
  if (static_cast<int>(flags.size()) != num_modes) {
    throw DimensionMismatch(fmt::format("{} delivery flags given for {} modes", flags.size(), num_modes));
  }
  const int n = plant.n();
  const int m = plant.m();
  std::vector<AugmentedMode> out;
  out.reserve(flags.size());
  for (int f : flags) {
    if (f != 0 && f != 1) throw DimensionMismatch("delivery flags must be 0 or 1");
    AugmentedMode am;
    am.a_bar = Mat::Zero(n + m, n + m);
    am.b_bar = Mat::Zero(n + m, m);
    am.a_bar.topLeftCorner(n, n) = plant.A;
    if (f == 1) {
      am.b_bar.topRows(n) = plant.B;
      am.b_bar.bottomRows(m) = Mat::Identity(m, m);
    } else {
      am.a_bar.topRightCorner(n, m) = plant.B;
      am.a_bar.bottomRightCorner(m, m) = Mat::Identity(m, m);
    }
    out.push_back(std::move(am));
  }
  return out;
}

DelayFreeAugmentation delay_free_augment(const PlantModel& plant, const std::vector<AugmentedMode>& modes) {
  const int d = plant.d;
  if (d == 0) throw DelayZero("delay-free augmentation needs d >= 1; with d = 0 the system is already delay-free");
  const int nz = plant.nz();
  const int m = plant.m();
  const int ny = nz + d * m;
  DelayFreeAugmentation out;
  for (const auto& am : modes) {
    Mat c = Mat::Zero(ny, ny);
    c.topLeftCorner(nz, nz) = am.a_bar;
    c.block(0, nz + (d - 1) * m, nz, m) = am.b_bar;  // oldest pending control enters z
    for (int s = 1; s < d; ++s) {
      c.block(nz + s * m, nz + (s - 1) * m, m, m) = Mat::Identity(m, m);
    }
    out.c.push_back(std::move(c));
  }
  out.d_in = Mat::Zero(ny, m);
  out.d_in.block(nz, 0, m, m) = Mat::Identity(m, m);
  out.q_big = Mat::Zero(ny, ny);
  out.q_big.topLeftCorner(nz, nz) = plant.Q;
  return out;
}

Vec actuator_update(bool delivered, const Vec& u_c, const Vec& u_a_prev) { return delivered ? u_c : u_a_prev; }

Vec plant_step(const Vec& x, const Vec& u_a_delayed, const PlantModel& plant) {
  if (x.size() != plant.n() || u_a_delayed.size() != plant.m()) {
    throw DimensionMismatch(fmt::format("plant_step expects x of size {} and u of size {}, got {} and {}", plant.n(),
                                        plant.m(), x.size(), u_a_delayed.size()));
  }
  return plant.A * x + plant.B * u_a_delayed;
}

JumpSystem make_system(PlantModel plant, MarkovChain chain, std::vector<int> flags) {
  if (flags.empty()) flags = default_delivery_flags(chain.num_modes());
  auto modes = augment(plant, chain.num_modes(), flags);
  return JumpSystem{std::move(plant), std::move(chain), std::move(flags), std::move(modes)};
}

}  // namespace ncs
