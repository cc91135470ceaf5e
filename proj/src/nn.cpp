#include "vitppg/nn.hpp"

namespace vitppg::nn {

Matrix layer_norm_rows(const Matrix& x, const Vector& gamma, const Vector& beta, LayerNormCache* cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Matrix xhat(n, d);
  Vector rstd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mean = x.row(i).mean();
    const Scalar var = (x.row(i).array() - mean).square().mean();
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mean) * rstd(i);
  }
  Matrix y = (xhat.array().rowwise() * gamma.transpose().array()).rowwise() + beta.transpose().array();
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

Matrix layer_norm_rows_backward(const Matrix& dy, const LayerNormCache& cache, const Vector& gamma, Vector& dgamma,
                                Vector& dbeta) {
  dgamma += (dy.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
  dbeta += dy.colwise().sum().transpose();
  const Matrix dxhat = dy.array().rowwise() * gamma.transpose().array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const Scalar mean_d = dxhat.row(i).mean();
    const Scalar mean_dx = (dxhat.row(i).array() * cache.xhat.row(i).array()).mean();
    dx.row(i) = cache.rstd(i) * (dxhat.row(i).array() - mean_d - cache.xhat.row(i).array() * mean_dx);
  }
  return dx;
}

void softmax_rows_inplace(Matrix& scores) {
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    const Scalar m = row.maxCoeff();
    Scalar sum = 0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      row(j) = (row(j) == -std::numeric_limits<Scalar>::infinity()) ? 0.0 : std::exp(row(j) - m);
      sum += row(j);
    }
    row /= sum;
  }
}

}  // namespace vitppg::nn
