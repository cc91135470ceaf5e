#include "vitppg/pool_head.hpp"

#include <cmath>
#include <limits>

#include "vitppg/random.hpp"

namespace vitppg {

PoolParams init_pool(int width) { return PoolParams{Vector::Zero(width)}; }

HeadParams init_head(int width, int hidden, std::uint64_t seed) {
  auto rng = derived_stream(seed, {0x68656164});
  HeadParams h;
  h.ln_gamma = Vector::Ones(width);
  h.ln_beta = Vector::Zero(width);
  h.fc1_weight = random_normal(hidden, width, 1.0 / std::sqrt(static_cast<double>(width)), rng);
  h.fc1_bias = Vector::Zero(hidden);
  h.out_weight = random_normal(hidden, 1, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  h.out_bias = Vector::Zero(1);
  return h;
}

Vector attention_pool(const FeatureMap& fm, const PoolParams& params, Vector* alpha) {
  const Eigen::Index n = fm.features.cols();
  if (params.score.size() != fm.features.rows()) throw ConfigError("pool score width does not match features");
  Vector scores = Vector::Constant(n, -std::numeric_limits<double>::infinity());
  double max_score = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!fm.valid(k)) continue;
    scores(k) = params.score.dot(fm.features.col(k));
    max_score = any ? std::max(max_score, scores(k)) : scores(k);
    any = true;
  }
  if (!any) throw EmptyPoolError("attention_pool: no valid positions");

  Vector weights = Vector::Zero(n);
  double z = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!fm.valid(k)) continue;
    weights(k) = std::exp(scores(k) - max_score);
    z += weights(k);
  }
  Vector pooled = Vector::Zero(fm.features.rows());
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!fm.valid(k)) continue;
    weights(k) /= z;
    pooled += weights(k) * fm.features.col(k);
  }
  if (!pooled.allFinite()) throw NumericError("attention_pool: non-finite pooled vector");
  if (alpha != nullptr) *alpha = std::move(weights);
  return pooled;
}

Matrix attention_pool_backward(const FeatureMap& fm, const Vector& alpha, const Vector& d_pooled,
                               const PoolParams& params, PoolParams& grads) {
  const Eigen::Index n = fm.features.cols();
  Matrix d_features = Matrix::Zero(fm.features.rows(), n);
  Vector d_alpha = Vector::Zero(n);
  double weighted = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!fm.valid(k)) continue;
    d_alpha(k) = d_pooled.dot(fm.features.col(k));
    weighted += alpha(k) * d_alpha(k);
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!fm.valid(k)) continue;
    const double ds = alpha(k) * (d_alpha(k) - weighted);
    grads.score += ds * fm.features.col(k);
    d_features.col(k) = alpha(k) * d_pooled + ds * params.score;
  }
  return d_features;
}

double regress(const Vector& pooled, const HeadParams& params, HeadTape* tape) {
  if (pooled.size() != params.ln_gamma.size() || params.fc1_weight.cols() != pooled.size() ||
      params.out_weight.size() != params.fc1_weight.rows() || params.out_bias.size() != 1) {
    throw ConfigError("regression head shape mismatch");
  }
  HeadTape local;
  HeadTape& t = tape != nullptr ? *tape : local;
  t.pooled = pooled;
  t.normed = nn::layer_norm_rows(pooled.transpose(), params.ln_gamma, params.ln_beta, &t.ln).transpose();
  if (!t.normed.allFinite()) throw NumericError("regress: non-finite value after head layer norm");
  t.pre_gelu = params.fc1_weight * t.normed + params.fc1_bias;
  if (!t.pre_gelu.allFinite()) throw NumericError("regress: non-finite value after head fc1");
  t.post_gelu = nn::gelu(t.pre_gelu);
  const double y = params.out_weight.dot(t.post_gelu) + params.out_bias(0);
  if (!std::isfinite(y)) throw NumericError("regress: non-finite head output");
  return y;
}

Vector regress_backward(const HeadTape& tape, double d_y, const HeadParams& params, HeadParams& grads) {
  grads.out_weight += d_y * tape.post_gelu;
  grads.out_bias(0) += d_y;
  const Vector d_pre =
      (d_y * params.out_weight).cwiseProduct(tape.pre_gelu.unaryExpr([](double x) { return nn::gelu_grad(x); }));
  grads.fc1_weight += d_pre * tape.normed.transpose();
  grads.fc1_bias += d_pre;
  const Matrix d_normed = (params.fc1_weight.transpose() * d_pre).transpose();
  return nn::layer_norm_rows_backward(d_normed, tape.ln, params.ln_gamma, grads.ln_gamma, grads.ln_beta).transpose();
}

}  // namespace vitppg
