#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "vitppg/common.hpp"
#include "vitppg/nn.hpp"
#include "vitppg/tensorize.hpp"

namespace vitppg {

// Pre-norm transformer block parameters. Weights map rows: y = x W^T + b.
struct LayerParams {
  Vector ln1_gamma, ln1_beta;
  Matrix q_weight;
  Vector q_bias;
  Matrix k_weight;
  Vector k_bias;
  Matrix v_weight;
  Vector v_bias;
  Matrix o_weight;
  Vector o_bias;
  Vector ln2_gamma, ln2_beta;
  Matrix fc1_weight;  // mlp_hidden x D
  Vector fc1_bias;
  Matrix fc2_weight;  // D x mlp_hidden
  Vector fc2_bias;
};

struct EncoderParams {
  int n_heads = 1;
  Matrix patch_weight;  // D x 3p^2
  Vector patch_bias;
  Vector cls;
  Matrix registers;    // R x D
  Matrix pos_special;  // (1 + R) x D, CLS then registers
  Matrix pos_row;      // max_grid x D
  Matrix pos_col;      // max_grid x D
  std::vector<LayerParams> layers;
  Vector norm_gamma, norm_beta;

  int width() const { return static_cast<int>(cls.size()); }
  int depth() const { return static_cast<int>(layers.size()); }
  int n_registers() const { return static_cast<int>(registers.rows()); }
};

// N(0, 0.02^2) weights and embeddings, zero biases, unit layer-norm scales.
EncoderParams init_encoder(const BackboneProfile& profile, std::uint64_t seed);

enum class QkvSlot { q = 0, k = 1, v = 2 };

struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;
  double dropout = 0.05;
};

// Low-rank update (alpha / rank) * up * down added to a frozen projection.
struct LoraAdapter {
  int rank = 8;
  double alpha = 16.0;
  double dropout = 0.05;
  Matrix down;  // A: rank x D
  Matrix up;    // B: D x rank

  double scale() const { return alpha / rank; }
  Eigen::Index parameter_count() const { return down.size() + up.size(); }
};

// Per layer, an optional adapter on each of the Q, K and V projections.
struct AdapterSet {
  std::vector<std::array<std::optional<LoraAdapter>, 3>> layers;

  bool empty() const;
};

// B = 0, A ~ U(-1/sqrt(D), 1/sqrt(D)) drawn from a stream keyed by (seed, layer, slot).
LoraAdapter lora_wrap(int layer_id, QkvSlot slot, const LoraConfig& cfg, int width, std::uint64_t seed);
AdapterSet make_qkv_adapters(int depth, int width, const LoraConfig& cfg, std::uint64_t seed);

// Rows: CLS, R registers, then patch tokens in row-major grid order.
struct TokenBatch {
  Matrix tokens;
  MaskVector token_mask;
  PatchGrid grid;
  int n_registers = 0;

  Eigen::Index patch_offset() const { return 1 + n_registers; }
  Eigen::Index size() const { return tokens.rows(); }
};

TokenBatch embed_patches(const PatchSet& ps, const EncoderParams& params);

// Activations kept for the backward pass.
struct LayerTape {
  Matrix input;
  nn::LayerNormCache ln1;
  Matrix h1;
  std::array<Matrix, 3> lora_input;  // h1 after dropout (empty without adapter)
  std::array<Matrix, 3> lora_mid;    // lora_input * down^T
  std::array<Matrix, 3> dropout_scale;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head
  Matrix attn;
  Matrix z1;
  nn::LayerNormCache ln2;
  Matrix h2;
  Matrix pre_gelu;
  Matrix post_gelu;
};

struct EncoderTape {
  std::vector<LayerTape> layers;
  nn::LayerNormCache final_ln;
  MaskVector valid;
};

struct EncoderTrace {
  std::vector<std::vector<Matrix>> attention;  // [layer][head], tokens x tokens
};

struct ForwardOptions {
  bool training = false;  // enables adapter dropout
  std::uint64_t dropout_seed = 0;
  EncoderTrace* trace = nullptr;
  EncoderTape* tape = nullptr;
};

// Invalid tokens receive no attention from any query and are passed through
// unchanged; an empty block stack is the identity.
TokenBatch encoder_forward(const TokenBatch& tb, const EncoderParams& params, const AdapterSet* adapters = nullptr,
                           const ForwardOptions& opts = {});

// Accumulates parameter gradients and returns d(loss)/d(input tokens).
Matrix encoder_backward(const EncoderTape& tape, const Matrix& d_out, const EncoderParams& params,
                        const AdapterSet* adapters, EncoderParams& grads, AdapterSet* adapter_grads);

void embed_backward(const PatchSet& ps, const Matrix& d_tokens, EncoderParams& grads);

// Patch tokens as a D x (H_f * W_f) map, column index h * W_f + w.
struct FeatureMap {
  Matrix features;
  MaskGrid mask;  // H_f x W_f
  PatchGrid grid;

  auto at(int h, int w) const { return features.col(static_cast<Eigen::Index>(h) * grid.cols + w); }
  bool valid(Eigen::Index k) const { return mask(k / grid.cols, k % grid.cols) != 0; }
};

FeatureMap extract_feature_map(const TokenBatch& tb);

}  // namespace vitppg
