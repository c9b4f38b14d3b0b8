#pragma once

#include <string>
#include <vector>

#include "ncs/linalg.hpp"
#include "ncs/markov_chain.hpp"

namespace ncs {

// Plant x_{k+1} = A x_k + B u^a_{k-d} with stage weight Q on
// z_k = [x_k; u^a_{k-d-1}] and R on the computed control.
struct PlantModel {
  Mat A;
  Mat B;
  int d = 0;
  Mat Q;
  Mat R;
  Mat terminal;  // weight on z_{N+1}, finite horizon only

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int nz() const { return n() + m(); }
};

// Validates shapes and definiteness (Q, terminal PSD; R PD) and symmetrizes
// the weights. Asymmetry above 1e-9 appends a message to `warnings`.
// An empty `terminal` defaults to zero.
PlantModel make_plant(Mat A, Mat B, int d, Mat Q, Mat R, Mat terminal = Mat(),
                      std::vector<std::string>* warnings = nullptr);

struct AugmentedMode {
  Mat a_bar;  // [[A, (1-f)B], [0, (1-f)I]]
  Mat b_bar;  // [[f B], [f I]]
};

// Default delivery flags: mode 0 loses the packet, every other mode delivers.
std::vector<int> default_delivery_flags(int num_modes);

// Per-mode augmented pair for delivery flags f_i in {0,1}. An empty `flags`
// uses the default mapping.
std::vector<AugmentedMode> augment(const PlantModel& plant, int num_modes, const std::vector<int>& flags = {});

// Delay-free form on Y_k = [z_k; u^c_{k-1}; ...; u^c_{k-d}]:
// Y_{k+1} = C_i Y_k + D u^c_k with stage weight q_big on Y.
struct DelayFreeAugmentation {
  std::vector<Mat> c;
  Mat d_in;
  Mat q_big;
};

DelayFreeAugmentation delay_free_augment(const PlantModel& plant, const std::vector<AugmentedMode>& modes);

// Hold-input actuator: the new control if delivered, else the previous one.
Vec actuator_update(bool delivered, const Vec& u_c, const Vec& u_a_prev);

Vec plant_step(const Vec& x, const Vec& u_a_delayed, const PlantModel& plant);

// Plant, chain and per-mode augmentation bundled together; every solver
// takes one of these.
struct JumpSystem {
  PlantModel plant;
  MarkovChain chain;
  std::vector<int> flags;
  std::vector<AugmentedMode> modes;

  int num_modes() const { return chain.num_modes(); }
  int d() const { return plant.d; }
  int n() const { return plant.n(); }
  int m() const { return plant.m(); }
  int nz() const { return plant.nz(); }
};

JumpSystem make_system(PlantModel plant, MarkovChain chain, std::vector<int> flags = {});

}  // namespace ncs
