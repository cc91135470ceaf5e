#include "vitppg/vit.hpp"

#include <cmath>
#include <limits>

#include "vitppg/random.hpp"

namespace vitppg {

namespace {

constexpr double kInitStd = 0.02;

Vector normal_vector(Eigen::Index n, std::mt19937_64& rng) { return random_normal(n, 1, kInitStd, rng); }

void zero_rows(Matrix& m, const MaskVector& valid) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (valid(i) == 0) m.row(i).setZero();
  }
}

void restore_invalid_rows(Matrix& out, const Matrix& in, const MaskVector& valid) {
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (valid(i) == 0) out.row(i) = in.row(i);
  }
}

const LoraAdapter* adapter_at(const AdapterSet* adapters, int layer, int slot) {
  if (adapters == nullptr || adapters->layers.empty()) return nullptr;
  const auto& a = adapters->layers[static_cast<std::size_t>(layer)][static_cast<std::size_t>(slot)];
  return a ? &*a : nullptr;
}

void check_adapters(const AdapterSet* adapters, const EncoderParams& params) {
  if (adapters == nullptr || adapters->layers.empty()) return;
  if (static_cast<int>(adapters->layers.size()) != params.depth()) {
    throw ConfigError("adapter set depth does not match encoder depth");
  }
  const Eigen::Index d = params.width();
  for (const auto& layer : adapters->layers) {
    for (const auto& a : layer) {
      if (!a) continue;
      if (a->down.rows() != a->rank || a->down.cols() != d || a->up.rows() != d || a->up.cols() != a->rank) {
        throw ConfigError("LoRA adapter shape does not match encoder width");
      }
    }
  }
}

}  // namespace

EncoderParams init_encoder(const BackboneProfile& profile, std::uint64_t seed) {
  profile.validate();
  const Eigen::Index d = profile.width;
  const Eigen::Index hidden = profile.mlp_hidden;
  auto rng = derived_stream(seed, {0x656e63});

  EncoderParams p;
  p.n_heads = profile.n_heads;
  p.patch_weight = random_normal(d, profile.patch_dim(), kInitStd, rng);
  p.patch_bias = Vector::Zero(d);
  p.cls = normal_vector(d, rng);
  p.registers = random_normal(profile.n_registers, d, kInitStd, rng);
  p.pos_special = random_normal(1 + profile.n_registers, d, kInitStd, rng);
  p.pos_row = random_normal(profile.max_grid, d, kInitStd, rng);
  p.pos_col = random_normal(profile.max_grid, d, kInitStd, rng);
  p.layers.resize(static_cast<std::size_t>(profile.depth));
  for (auto& l : p.layers) {
    l.ln1_gamma = Vector::Ones(d);
    l.ln1_beta = Vector::Zero(d);
    l.q_weight = random_normal(d, d, kInitStd, rng);
    l.q_bias = Vector::Zero(d);
    l.k_weight = random_normal(d, d, kInitStd, rng);
    l.k_bias = Vector::Zero(d);
    l.v_weight = random_normal(d, d, kInitStd, rng);
    l.v_bias = Vector::Zero(d);
    l.o_weight = random_normal(d, d, kInitStd, rng);
    l.o_bias = Vector::Zero(d);
    l.ln2_gamma = Vector::Ones(d);
    l.ln2_beta = Vector::Zero(d);
    l.fc1_weight = random_normal(hidden, d, kInitStd, rng);
    l.fc1_bias = Vector::Zero(hidden);
    l.fc2_weight = random_normal(d, hidden, kInitStd, rng);
    l.fc2_bias = Vector::Zero(d);
  }
  p.norm_gamma = Vector::Ones(d);
  p.norm_beta = Vector::Zero(d);
  return p;
}

bool AdapterSet::empty() const {
  for (const auto& layer : layers) {
    for (const auto& a : layer) {
      if (a) return false;
    }
  }
  return true;
}

LoraAdapter lora_wrap(int layer_id, QkvSlot slot, const LoraConfig& cfg, int width, std::uint64_t seed) {
  if (cfg.rank < 1) throw ConfigError("LoRA rank must be >= 1");
  if (cfg.rank > width) throw ConfigError("LoRA rank exceeds model width");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("LoRA dropout must be in [0, 1)");
  LoraAdapter a;
  a.rank = cfg.rank;
  a.alpha = cfg.alpha;
  a.dropout = cfg.dropout;
  auto rng = derived_stream(seed, {0x6c6f7261, static_cast<std::uint64_t>(layer_id), static_cast<std::uint64_t>(slot)});
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  a.down.resize(cfg.rank, width);
  for (Eigen::Index j = 0; j < a.down.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.down.rows(); ++i) a.down(i, j) = (2.0 * uniform01(rng) - 1.0) * bound;
  }
  a.up = Matrix::Zero(width, cfg.rank);
  return a;
}

AdapterSet make_qkv_adapters(int depth, int width, const LoraConfig& cfg, std::uint64_t seed) {
  AdapterSet set;
  set.layers.resize(static_cast<std::size_t>(depth));
  for (int l = 0; l < depth; ++l) {
    for (int s = 0; s < 3; ++s) set.layers[l][s] = lora_wrap(l, static_cast<QkvSlot>(s), cfg, width, seed);
  }
  return set;
}

TokenBatch embed_patches(const PatchSet& ps, const EncoderParams& params) {
  if (ps.patches.cols() != params.patch_weight.cols()) {
    throw ConfigError("patch vector length " + std::to_string(ps.patches.cols()) + " does not match projector input " +
                      std::to_string(params.patch_weight.cols()));
  }
  if (ps.grid.rows > params.pos_row.rows() || ps.grid.cols > params.pos_col.rows()) {
    throw ConfigError("patch grid exceeds positional table size");
  }
  if (ps.patches.rows() != ps.grid.count()) throw ConfigError("patch count does not match grid");
  const int r = params.n_registers();
  const Eigen::Index n = ps.grid.count();
  TokenBatch tb;
  tb.grid = ps.grid;
  tb.n_registers = r;
  tb.tokens.resize(1 + r + n, params.width());
  tb.tokens.row(0) = params.cls.transpose() + params.pos_special.row(0);
  for (int i = 0; i < r; ++i) tb.tokens.row(1 + i) = params.registers.row(i) + params.pos_special.row(1 + i);
  const Matrix x = nn::linear(ps.patches, params.patch_weight, params.patch_bias);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index gr = i / ps.grid.cols;
    const Eigen::Index gc = i % ps.grid.cols;
    tb.tokens.row(1 + r + i) = x.row(i) + params.pos_row.row(gr) + params.pos_col.row(gc);
  }
  tb.token_mask.resize(1 + r + n);
  tb.token_mask.head(1 + r).setOnes();
  tb.token_mask.tail(n) = ps.patch_mask;
  return tb;
}

TokenBatch encoder_forward(const TokenBatch& tb, const EncoderParams& params, const AdapterSet* adapters,
                           const ForwardOptions& opts) {
  check_adapters(adapters, params);
  const Eigen::Index n = tb.size();
  const int d = params.width();
  if (tb.tokens.cols() != d) throw ConfigError("token width does not match encoder width");
  const int heads = params.n_heads;
  const int dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const MaskVector& valid = tb.token_mask;

  auto rng = derived_stream(opts.dropout_seed, {0x64726f70});
  EncoderTape* tape = opts.tape;
  if (tape != nullptr) {
    tape->layers.assign(static_cast<std::size_t>(params.depth()), LayerTape{});
    tape->valid = valid;
  }
  if (opts.trace != nullptr) opts.trace->attention.assign(static_cast<std::size_t>(params.depth()), {});

  Matrix z = tb.tokens;
  LayerTape scratch;
  for (int l = 0; l < params.depth(); ++l) {
    const LayerParams& L = params.layers[static_cast<std::size_t>(l)];
    LayerTape& t = tape != nullptr ? tape->layers[static_cast<std::size_t>(l)] : scratch;
    t.input = z;
    t.h1 = nn::layer_norm_rows(z, L.ln1_gamma, L.ln1_beta, &t.ln1);

    std::array<Matrix, 3> proj = {nn::linear(t.h1, L.q_weight, L.q_bias), nn::linear(t.h1, L.k_weight, L.k_bias),
                                  nn::linear(t.h1, L.v_weight, L.v_bias)};
    for (int s = 0; s < 3; ++s) {
      const LoraAdapter* a = adapter_at(adapters, l, s);
      t.lora_input[s].resize(0, 0);
      t.lora_mid[s].resize(0, 0);
      t.dropout_scale[s].resize(0, 0);
      if (a == nullptr) continue;
      Matrix in = t.h1;
      if (opts.training && a->dropout > 0.0) {
        const double keep = 1.0 - a->dropout;
        Matrix scale(n, d);
        for (Eigen::Index j = 0; j < d; ++j) {
          for (Eigen::Index i = 0; i < n; ++i) scale(i, j) = uniform01(rng) < keep ? 1.0 / keep : 0.0;
        }
        in = in.cwiseProduct(scale);
        t.dropout_scale[s] = std::move(scale);
      }
      t.lora_mid[s] = in * a->down.transpose();
      proj[s] += a->scale() * (t.lora_mid[s] * a->up.transpose());
      t.lora_input[s] = std::move(in);
    }
    t.q = std::move(proj[0]);
    t.k = std::move(proj[1]);
    t.v = std::move(proj[2]);

    t.attn.resize(n, d);
    t.probs.resize(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Matrix scores = (t.q.middleCols(h * dh, dh) * t.k.middleCols(h * dh, dh).transpose()) * inv_sqrt;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (valid(j) == 0) scores.col(j).setConstant(-std::numeric_limits<double>::infinity());
      }
      nn::softmax_rows_inplace(scores);
      t.attn.middleCols(h * dh, dh) = scores * t.v.middleCols(h * dh, dh);
      if (opts.trace != nullptr) opts.trace->attention[static_cast<std::size_t>(l)].push_back(scores);
      t.probs[static_cast<std::size_t>(h)] = std::move(scores);
    }

    t.z1 = z + nn::linear(t.attn, L.o_weight, L.o_bias);
    t.h2 = nn::layer_norm_rows(t.z1, L.ln2_gamma, L.ln2_beta, &t.ln2);
    t.pre_gelu = nn::linear(t.h2, L.fc1_weight, L.fc1_bias);
    t.post_gelu = nn::gelu(t.pre_gelu);
    Matrix z2 = t.z1 + nn::linear(t.post_gelu, L.fc2_weight, L.fc2_bias);
    restore_invalid_rows(z2, z, valid);
    z = std::move(z2);
  }

  TokenBatch out = tb;
  if (params.depth() > 0) {
    nn::LayerNormCache scratch_ln;
    out.tokens = nn::layer_norm_rows(z, params.norm_gamma, params.norm_beta,
                                     tape != nullptr ? &tape->final_ln : &scratch_ln);
    restore_invalid_rows(out.tokens, z, valid);
  }
  return out;
}

Matrix encoder_backward(const EncoderTape& tape, const Matrix& d_out, const EncoderParams& params,
                        const AdapterSet* adapters, EncoderParams& grads, AdapterSet* adapter_grads) {
  const MaskVector& valid = tape.valid;
  const int d = params.width();
  const int heads = params.n_heads;
  const int dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  auto split = [&valid](const Matrix& g, Matrix& active, Matrix& passthrough) {
    active = g;
    zero_rows(active, valid);
    passthrough = g - active;
  };

  Matrix dz = d_out;
  if (params.depth() > 0) {
    Matrix active, pass;
    split(d_out, active, pass);
    dz = nn::layer_norm_rows_backward(active, tape.final_ln, params.norm_gamma, grads.norm_gamma, grads.norm_beta) +
         pass;
  }

  for (int l = params.depth() - 1; l >= 0; --l) {
    const LayerParams& L = params.layers[static_cast<std::size_t>(l)];
    LayerParams& G = grads.layers[static_cast<std::size_t>(l)];
    const LayerTape& t = tape.layers[static_cast<std::size_t>(l)];

    Matrix d2, pass;
    split(dz, d2, pass);

    // MLP branch
    G.fc2_weight += d2.transpose() * t.post_gelu;
    G.fc2_bias += d2.colwise().sum().transpose();
    const Matrix dpre =
        (d2 * L.fc2_weight).cwiseProduct(t.pre_gelu.unaryExpr([](double x) { return nn::gelu_grad(x); }));
    G.fc1_weight += dpre.transpose() * t.h2;
    G.fc1_bias += dpre.colwise().sum().transpose();
    Matrix dz1 = d2 + nn::layer_norm_rows_backward(dpre * L.fc1_weight, t.ln2, L.ln2_gamma, G.ln2_gamma, G.ln2_beta);

    // attention branch
    G.o_weight += dz1.transpose() * t.attn;
    G.o_bias += dz1.colwise().sum().transpose();
    const Matrix dattn = dz1 * L.o_weight;
    const Eigen::Index n = dz1.rows();
    std::array<Matrix, 3> dproj = {Matrix::Zero(n, d), Matrix::Zero(n, d), Matrix::Zero(n, d)};
    for (int h = 0; h < heads; ++h) {
      const Matrix& p = t.probs[static_cast<std::size_t>(h)];
      const auto d_head = dattn.middleCols(h * dh, dh);
      const Matrix dp = d_head * t.v.middleCols(h * dh, dh).transpose();
      dproj[2].middleCols(h * dh, dh) = p.transpose() * d_head;
      const Vector row_dot = (dp.array() * p.array()).rowwise().sum();
      const Matrix ds = (p.array() * (dp.colwise() - row_dot).array()).matrix() * inv_sqrt;
      dproj[0].middleCols(h * dh, dh) = ds * t.k.middleCols(h * dh, dh);
      dproj[1].middleCols(h * dh, dh) = ds.transpose() * t.q.middleCols(h * dh, dh);
    }

    G.q_weight += dproj[0].transpose() * t.h1;
    G.q_bias += dproj[0].colwise().sum().transpose();
    G.k_weight += dproj[1].transpose() * t.h1;
    G.k_bias += dproj[1].colwise().sum().transpose();
    G.v_weight += dproj[2].transpose() * t.h1;
    G.v_bias += dproj[2].colwise().sum().transpose();
    Matrix dh1 = dproj[0] * L.q_weight + dproj[1] * L.k_weight + dproj[2] * L.v_weight;

    for (int s = 0; s < 3; ++s) {
      const LoraAdapter* a = adapter_at(adapters, l, s);
      if (a == nullptr) continue;
      const Matrix dmid = a->scale() * (dproj[s] * a->up);
      if (adapter_grads != nullptr) {
        auto& ga = adapter_grads->layers[static_cast<std::size_t>(l)][static_cast<std::size_t>(s)];
        ga->up += a->scale() * (dproj[s].transpose() * t.lora_mid[s]);
        ga->down += dmid.transpose() * t.lora_input[s];
      }
      Matrix din = dmid * a->down;
      if (t.dropout_scale[s].size() != 0) din = din.cwiseProduct(t.dropout_scale[s]);
      dh1 += din;
    }

    dz = dz1 + nn::layer_norm_rows_backward(dh1, t.ln1, L.ln1_gamma, G.ln1_gamma, G.ln1_beta) + pass;
  }
  return dz;
}

void embed_backward(const PatchSet& ps, const Matrix& d_tokens, EncoderParams& grads) {
  const Eigen::Index r = grads.registers.rows();
  const Eigen::Index n = ps.grid.count();
  grads.cls += d_tokens.row(0).transpose();
  grads.registers += d_tokens.middleRows(1, r);
  grads.pos_special += d_tokens.topRows(1 + r);
  const auto dx = d_tokens.bottomRows(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    grads.pos_row.row(i / ps.grid.cols) += dx.row(i);
    grads.pos_col.row(i % ps.grid.cols) += dx.row(i);
  }
  grads.patch_weight += dx.transpose() * ps.patches;
  grads.patch_bias += dx.colwise().sum().transpose();
}

FeatureMap extract_feature_map(const TokenBatch& tb) {
  const Eigen::Index n = tb.grid.count();
  if (tb.size() != tb.patch_offset() + n) {
    throw std::logic_error("extract_feature_map: token count does not match 1 + R + H_f * W_f");
  }
  FeatureMap fm;
  fm.grid = tb.grid;
  fm.features = tb.tokens.bottomRows(n).transpose();
  fm.mask.resize(tb.grid.rows, tb.grid.cols);
  for (Eigen::Index k = 0; k < n; ++k) fm.mask(k / tb.grid.cols, k % tb.grid.cols) = tb.token_mask(tb.patch_offset() + k);
  return fm;
}

}  // namespace vitppg
