#include "ncs/markov_chain.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "ncs/errors.hpp"

namespace ncs {

MarkovChain MarkovChain::validate(const Mat& xi) {
  if (xi.rows() != xi.cols()) {
    throw ShapeMismatch(fmt::format("transition matrix must be square, got {}x{}", xi.rows(), xi.cols()));
  }
  if (xi.rows() < 2) throw TooFewModes("a Markov chain needs at least two modes");
  for (Eigen::Index i = 0; i < xi.rows(); ++i) {
    for (Eigen::Index j = 0; j < xi.cols(); ++j) {
      if (!std::isfinite(xi(i, j)) || xi(i, j) < 0.0) {
        throw NegativeEntry(fmt::format("transition entry ({},{}) = {} is negative or not finite", i, j, xi(i, j)));
      }
    }
    const double s = xi.row(i).sum();
    if (std::abs(s - 1.0) > 1e-9) {
      throw NonStochastic(fmt::format("row {} sums to {:.17g}, expected 1", i, s));
    }
  }
  return MarkovChain(xi);
}

std::uint64_t path_count(int num_modes, int horizon) {
  std::uint64_t n = 1;
  for (int h = 0; h < horizon; ++h) {
    if (n > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(num_modes)) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    n *= static_cast<std::uint64_t>(num_modes);
  }
  return n;
}

namespace {

void dfs(const MarkovChain& chain, std::vector<int>& modes, int depth, double weight,
         const std::function<void(std::span<const int>, double)>& visit) {
  if (depth + 1 == static_cast<int>(modes.size())) {
    visit(std::span<const int>(modes), weight);
    return;
  }
  const int from = modes[depth];
  for (int j = 0; j < chain.num_modes(); ++j) {
    const double p = chain.prob(from, j);
    if (p == 0.0) continue;
    modes[depth + 1] = j;
    dfs(chain, modes, depth + 1, weight * p, visit);
  }
}

}  // namespace

void for_each_path(const MarkovChain& chain, int start, int horizon,
                   const std::function<void(std::span<const int>, double)>& visit, std::uint64_t cap) {
  if (start < 0 || start >= chain.num_modes()) {
    throw DimensionMismatch(fmt::format("start mode {} out of range", start));
  }
  if (horizon < 0) throw DimensionMismatch("negative path horizon");
  const std::uint64_t n = path_count(chain.num_modes(), horizon);
  if (n > cap) throw PathExplosion(n, cap);
  std::vector<int> modes(static_cast<std::size_t>(horizon) + 1, 0);
  modes[0] = start;
  dfs(chain, modes, 0, 1.0, visit);
}

Mat path_expectation(const MarkovChain& chain, int start, int horizon,
                     const std::function<Mat(std::span<const int>)>& f, std::uint64_t cap) {
  Mat acc;
  bool first = true;
  for_each_path(
      chain, start, horizon,
      [&](std::span<const int> modes, double w) {
        Mat v = f(modes);
        if (first) {
          acc = w * v;
          first = false;
        } else {
          if (v.rows() != acc.rows() || v.cols() != acc.cols()) {
            throw ShapeMismatch(fmt::format("path function returned {}x{}, expected {}x{}", v.rows(), v.cols(),
                                            acc.rows(), acc.cols()));
          }
          acc += w * v;
        }
      },
      cap);
  return acc;
}

Mat next_expectation(const MarkovChain& chain, int i, const std::function<Mat(int)>& f) {
  Mat acc;
  bool first = true;
  for (int j = 0; j < chain.num_modes(); ++j) {
    const double p = chain.prob(i, j);
    if (p == 0.0) continue;
    if (first) {
      acc = p * f(j);
      first = false;
    } else {
      acc += p * f(j);
    }
  }
  return acc;
}

double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

int sample_next(const MarkovChain& chain, int from, double u) {
  double c = 0.0;
  int last_positive = 0;
  for (int j = 0; j < chain.num_modes(); ++j) {
    const double p = chain.prob(from, j);
    if (p == 0.0) continue;
    last_positive = j;
    c += p;
    if (u < c) return j;
  }
  // Row sums may fall a hair below 1; fall back to the last reachable mode.
  return last_positive;
}

std::vector<int> sample_path(const MarkovChain& chain, int start, int length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(std::max(length, 0)));
  int cur = start;
  for (int t = 0; t < length; ++t) {
    cur = sample_next(chain, cur, uniform01(rng()));
    out.push_back(cur);
  }
  return out;
}

Vec stationary_distribution(const MarkovChain& chain) {
  const int m = chain.num_modes();
  const Mat a = chain.transition().transpose() - Mat::Identity(m, m);
  Eigen::FullPivLU<Mat> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() != m - 1) {
    throw NonUnique("stationary distribution is not unique (several closed classes)");
  }
  Mat sys(m + 1, m);
  sys << a, Mat::Ones(1, m);
  Vec rhs = Vec::Zero(m + 1);
  rhs(m) = 1.0;
  Vec pi = sys.colPivHouseholderQr().solve(rhs);
  for (int i = 0; i < m; ++i) pi(i) = std::max(pi(i), 0.0);
  return pi / pi.sum();
}

}  // namespace ncs
