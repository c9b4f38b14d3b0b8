#pragma once

#include <Eigen/Dense>

namespace ncs {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Largest absolute entry; 0 for empty matrices.
double max_abs(const Mat& m);

// Max-norm of a - b scaled by max(1, max_abs(a), max_abs(b)).
double rel_diff(const Mat& a, const Mat& b);

Mat symmetrize(const Mat& m);

// Smallest eigenvalue of the symmetric part of `m`.
double min_eigenvalue(const Mat& m);

// Largest absolute eigenvalue of the symmetric part of `m`.
double spectral_norm_sym(const Mat& m);

// Positive-definiteness test used throughout: min eigenvalue must exceed
// 1e-10 * max(1, ||m||).
bool is_positive_definite(const Mat& m, double* min_eig_out = nullptr);

}  // namespace ncs
