#pragma once
// Small shared builders for tests.

#include <random>

#include "vitppg/model.hpp"

namespace fixture {

// D=16, one block, two heads, 2x2 patches: a 4x4 image gives N=4.
inline vitppg::BackboneProfile micro_profile(int registers = 2) {
  auto p = vitppg::make_profile("dinov3_like", "tiny");
  p.preset = "micro";
  p.patch = 2;
  p.width = 16;
  p.depth = 1;
  p.n_heads = 2;
  p.mlp_hidden = 32;
  p.head_hidden = 16;
  p.n_registers = registers;
  p.max_grid = 4;
  return p;
}

inline vitppg::PatchSet random_patches(std::mt19937_64& rng, const vitppg::BackboneProfile& profile, int rows,
                                       int cols) {
  std::normal_distribution<double> d(0.0, 1.0);
  vitppg::PatchSet ps;
  ps.grid = {rows, cols};
  ps.patch = profile.patch;
  ps.patches.resize(ps.grid.count(), profile.patch_dim());
  for (Eigen::Index i = 0; i < ps.patches.size(); ++i) ps.patches.data()[i] = d(rng);
  ps.patch_mask = vitppg::MaskVector::Ones(ps.grid.count());
  return ps;
}

template <class Derived>
void fill_normal(Eigen::MatrixBase<Derived>& m, std::mt19937_64& rng, double std) {
  std::normal_distribution<double> d(0.0, std);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = d(rng);
}

// Non-zero adapters and pooling scores so every gradient path carries signal.
inline void perturb(vitppg::Model& model, std::mt19937_64& rng) {
  for (auto& layer : model.adapters.layers)
    for (auto& a : layer)
      if (a) fill_normal(a->up, rng, 0.1);
  fill_normal(model.pool.score, rng, 0.3);
}

}  // namespace fixture
