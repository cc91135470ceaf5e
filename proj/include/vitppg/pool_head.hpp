#pragma once

#include <cstdint>

#include "vitppg/common.hpp"
#include "vitppg/nn.hpp"
#include "vitppg/vit.hpp"

namespace vitppg {

struct PoolParams {
  Vector score;  // w_s
};

struct HeadParams {
  Vector ln_gamma, ln_beta;
  Matrix fc1_weight;  // hidden x D
  Vector fc1_bias;
  Vector out_weight;  // hidden
  Vector out_bias;    // single entry
};

PoolParams init_pool(int width);
HeadParams init_head(int width, int hidden, std::uint64_t seed);

// Masked soft attention pooling: s = w_s^T F, softmax over valid positions
// (max-subtracted), p = sum alpha F. Invalid positions are never read.
// `alpha` (optional) receives one weight per grid position, 0 on invalid ones.
Vector attention_pool(const FeatureMap& fm, const PoolParams& params, Vector* alpha = nullptr);

// Accumulates d w_s and returns dF with the same layout as fm.features.
Matrix attention_pool_backward(const FeatureMap& fm, const Vector& alpha, const Vector& d_pooled,
                               const PoolParams& params, PoolParams& grads);

struct HeadTape {
  Vector pooled;
  nn::LayerNormCache ln;
  Vector normed;
  Vector pre_gelu;
  Vector post_gelu;
};

// y = w_2^T GELU(W_1 LN(p) + b_1) + b_2. Throws NumericError naming the stage
// that produced a non-finite value.
double regress(const Vector& pooled, const HeadParams& params, HeadTape* tape = nullptr);

// Accumulates head gradients for dL/dy and returns dL/dp.
Vector regress_backward(const HeadTape& tape, double d_y, const HeadParams& params, HeadParams& grads);

}  // namespace vitppg
