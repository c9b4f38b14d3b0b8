#pragma once

// Instance generators shared by the unit and acceptance tests.

#include <cstdint>
#include <random>
#include <span>

#include "ncs/markov_chain.hpp"
#include "ncs/plant_model.hpp"
#include "ncs/policy.hpp"

namespace ncs::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng()); }

inline int pick(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline Mat random_matrix(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
  Mat a(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = scale * uniform(rng, -1.0, 1.0);
  return a;
}

inline Mat random_psd(std::mt19937_64& rng, int n) {
  const Mat a = random_matrix(rng, n, n);
  return a * a.transpose();
}

inline Mat random_pd(std::mt19937_64& rng, int n) { return random_psd(rng, n) + 0.5 * Mat::Identity(n, n); }

// Row-stochastic matrix; about one entry in six is zero (never a whole row).
inline Mat random_transition(std::mt19937_64& rng, int modes) {
  Mat xi(modes, modes);
  for (int i = 0; i < modes; ++i) {
    for (int j = 0; j < modes; ++j) xi(i, j) = rng() % 6 == 0 ? 0.0 : uniform(rng, 0.05, 1.0);
    if (xi.row(i).sum() == 0.0) xi(i, i) = 1.0;
    xi.row(i) /= xi.row(i).sum();
  }
  return xi;
}

struct Instance {
  JumpSystem sys;
  int horizon;
  InitialData init;
};

inline InitialData random_initial(std::mt19937_64& rng, const JumpSystem& sys) {
  InitialData init;
  init.x0 = random_matrix(rng, sys.n(), 1, 2.0);
  for (int j = 0; j < sys.d(); ++j) init.u_c_history.push_back(random_matrix(rng, sys.m(), 1));
  init.u_a_prev = random_matrix(rng, sys.m(), 1);
  Vec dist(sys.num_modes());
  for (int i = 0; i < sys.num_modes(); ++i) dist(i) = uniform(rng, 0.1, 1.0);
  init.mode_distribution = dist / dist.sum();
  return init;
}

inline Instance random_instance(std::mt19937_64& rng, int d_lo, int d_hi, int modes_hi, int horizon_hi) {
  const int n = pick(rng, 1, 2);
  const int m = pick(rng, 1, 2);
  const int d = pick(rng, d_lo, d_hi);
  const int modes = pick(rng, 2, modes_hi);
  const int horizon = pick(rng, std::max(d, 1), horizon_hi);
  PlantModel plant = make_plant(random_matrix(rng, n, n, 1.2), random_matrix(rng, n, m), d, random_psd(rng, n + m),
                                random_pd(rng, m), random_psd(rng, n + m));
  JumpSystem sys = make_system(std::move(plant), MarkovChain::validate(random_transition(rng, modes)));
  InitialData init = random_initial(rng, sys);
  return Instance{std::move(sys), horizon, std::move(init)};
}

// The scalar example: A = 1, B = 15, d = 1, Q = I, R = 10, two modes.
inline JumpSystem example_system() {
  Mat xi(2, 2);
  xi << 0.9, 0.1, 0.3, 0.7;
  return make_system(make_plant(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 15.0), 1, Mat::Identity(2, 2),
                                Mat::Constant(1, 1, 10.0)),
                     MarkovChain::validate(xi));
}

inline InitialData example_initial() {
  InitialData init;
  init.x0 = Vec::Constant(1, 10.0);
  init.u_c_history = {Vec::Constant(1, 1.0)};
  init.u_a_prev = Vec::Zero(1);
  return init;
}

// Deterministic pseudo-random vector keyed by an observed mode prefix, so a
// perturbation built from it is adapted by construction.
inline Vec prefix_noise(std::uint64_t salt, std::span<const int> prefix, int m) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ salt;
  for (int v : prefix) h = (h ^ static_cast<std::uint64_t>(v + 1)) * 0x100000001b3ULL;
  Vec out(m);
  for (int i = 0; i < m; ++i) {
    // splitmix64 step; cheap enough to call at every node of an enumeration
    h += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    out(i) = 2.0 * uniform01(z ^ (z >> 31)) - 1.0;
  }
  return out;
}

// base policy plus eps times prefix noise
inline PolicySpec perturbed(const PolicySpec& base, double eps, std::uint64_t salt, int m) {
  return AdaptedPolicy{[base, eps, salt, m](const DecisionContext& ctx) -> Vec {
    return decide(base, ctx, m) + eps * prefix_noise(salt, ctx.observed_modes, m);
  }};
}

// base policy with every gain scaled by (1 + rel)
inline PolicySpec scaled_gains(const TimeVaryingPolicy& base, double rel) {
  TimeVaryingPolicy p = base;
  for (auto& per_k : p.gains) {
    for (auto& g : per_k) {
      g.k0 *= 1.0 + rel;
      for (auto& kj : g.kj) kj *= 1.0 + rel;
    }
  }
  return p;
}

}  // namespace ncs::testing
