#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>

#include "vitppg/common.hpp"

namespace vitppg::nn {

inline constexpr Scalar kLayerNormEps = 1e-6;

// Exact (erf) GELU.
template <std::floating_point S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x / std::sqrt(S(2))));
}

template <std::floating_point S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x / std::sqrt(S(2))));
  const S pdf = std::exp(S(-0.5) * x * x) / std::sqrt(S(2) * std::numbers::pi_v<S>);
  return cdf + x * pdf;
}

template <typename Derived>
typename Derived::PlainObject gelu(const Eigen::MatrixBase<Derived>& x) {
  return x.unaryExpr([](typename Derived::Scalar v) { return gelu(v); });
}

struct LayerNormCache {
  Matrix xhat;  // normalized rows
  Vector rstd;  // 1 / sqrt(var + eps) per row
};

// Row-wise layer norm over the feature (column) axis.
Matrix layer_norm_rows(const Matrix& x, const Vector& gamma, const Vector& beta, LayerNormCache* cache = nullptr);

// Accumulates dgamma/dbeta and returns dx.
Matrix layer_norm_rows_backward(const Matrix& dy, const LayerNormCache& cache, const Vector& gamma, Vector& dgamma,
                                Vector& dbeta);

// Stable row softmax; -inf entries receive exactly zero weight.
void softmax_rows_inplace(Matrix& scores);

// y = x W^T + b (row per sample).
inline Matrix linear(const Matrix& x, const Matrix& weight, const Vector& bias) {
  Matrix y = x * weight.transpose();
  y.rowwise() += bias.transpose();
  return y;
}

}  // namespace vitppg::nn
