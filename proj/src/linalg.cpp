#include "ncs/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace ncs {

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double rel_diff(const Mat& a, const Mat& b) {
  if (a.size() == 0 && b.size() == 0) return 0.0;
  const double scale = std::max({1.0, max_abs(a), max_abs(b)});
  return max_abs(a - b) / scale;
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double spectral_norm_sym(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_positive_definite(const Mat& m, double* min_eig_out) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double norm = ev.cwiseAbs().maxCoeff();
  if (min_eig_out) *min_eig_out = lo;
  return std::isfinite(lo) && lo > 1e-10 * std::max(1.0, norm);
}

}  // namespace ncs
