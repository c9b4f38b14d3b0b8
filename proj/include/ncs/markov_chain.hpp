#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ncs/linalg.hpp"

namespace ncs {

inline constexpr std::uint64_t kDefaultPathCap = std::uint64_t{1} << 24;

// Homogeneous finite-state Markov chain with a validated transition matrix.
class MarkovChain {
 public:
  // Checks shape, non-negativity and unit row sums (1e-9).
  static MarkovChain validate(const Mat& transition);

  int num_modes() const { return static_cast<int>(xi_.rows()); }
  const Mat& transition() const { return xi_; }
  double prob(int from, int to) const { return xi_(from, to); }

 private:
  explicit MarkovChain(Mat xi) : xi_(std::move(xi)) {}
  Mat xi_;
};

// Number of mode sequences of length `horizon` after a fixed start,
// saturating at UINT64_MAX.
std::uint64_t path_count(int num_modes, int horizon);

// Visits every continuation path of length `horizon` from `start` with
// positive probability, in lexicographic order. `modes` passed to the
// visitor has length horizon + 1 and begins with `start`.
void for_each_path(const MarkovChain& chain, int start, int horizon,
                   const std::function<void(std::span<const int> modes, double weight)>& visit,
                   std::uint64_t cap = kDefaultPathCap);

// Conditional expectation E[f(path) | mode(0) = start] over `horizon`
// further steps. Zero-probability paths are skipped. Summation follows the
// fixed lexicographic path order so results are reproducible bit for bit.
Mat path_expectation(const MarkovChain& chain, int start, int horizon,
                     const std::function<Mat(std::span<const int> modes)>& f,
                     std::uint64_t cap = kDefaultPathCap);

// One-step conditional expectation sum_j xi(i,j) f(j).
Mat next_expectation(const MarkovChain& chain, int i, const std::function<Mat(int j)>& f);

// Uniform double in [0,1) from the top 53 bits of a 64-bit draw. Used in
// place of std::uniform_real_distribution so streams do not depend on the
// standard library implementation.
double uniform01(std::uint64_t bits);

// Draws the next mode by inverse CDF on row `from`.
int sample_next(const MarkovChain& chain, int from, double u);

// Samples `length` modes after `start` (not included in the result) from a
// Mersenne Twister (mt19937_64) stream seeded with `seed`.
std::vector<int> sample_path(const MarkovChain& chain, int start, int length, std::uint64_t seed);

// Unique stationary distribution; throws NonUnique if the chain has more
// than one closed communicating class.
Vec stationary_distribution(const MarkovChain& chain);

}  // namespace ncs
