#pragma once

#include <cmath>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "vitppg/common.hpp"

namespace vitppg {

// One labeled PPG window. Canonical framing is 1200 samples at 40 Hz, but any
// positive rate and non-empty length is accepted.
struct PpgRecord {
  std::string id;
  double fs = 40.0;
  Vector samples;
  std::map<std::string, double> labels;

  // Throws InvalidInput if fs <= 0, samples is empty or contains non-finite values.
  void validate() const;
};

inline constexpr Scalar kDefaultEpsStd = 1e-8;

// z-score with population (1/N) standard deviation over every coefficient of
// `v`. Inputs whose std falls below `eps_std` map to all zeros.
template <typename Derived>
typename Derived::PlainObject zscore(const Eigen::MatrixBase<Derived>& v,
                                     typename Derived::Scalar eps_std = kDefaultEpsStd) {
  using S = typename Derived::Scalar;
  if (v.size() == 0) throw InvalidInput("zscore: empty input");
  if (!v.allFinite()) throw InvalidInput("zscore: non-finite input");
  const S mean = v.mean();
  const S var = (v.array() - mean).square().mean();
  const S sd = std::sqrt(var);
  typename Derived::PlainObject out(v.rows(), v.cols());
  if (!(sd >= eps_std)) {
    out.setZero();
    return out;
  }
  out = ((v.array() - mean) / sd).matrix();
  return out;
}

// First (order 1) or second (order 2) discrete difference; output is shorter
// than the input by `order` samples.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> discrete_diff(
    const Eigen::MatrixBase<Derived>& v, int order) {
  using Out = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;
  if (order != 1 && order != 2) throw InvalidInput("discrete_diff: order must be 1 or 2");
  const Eigen::Index n = v.size();
  if (n <= order) throw InvalidInput("discrete_diff: sequence too short for requested order");
  Out d1(n - 1);
  for (Eigen::Index i = 1; i < n; ++i) d1(i - 1) = v(i) - v(i - 1);
  if (order == 1) return d1;
  Out d2(n - 2);
  for (Eigen::Index i = 1; i < n - 1; ++i) d2(i - 1) = d1(i) - d1(i - 1);
  return d2;
}

// Linear-interpolation resampling onto `target_len` uniformly spaced positions
// spanning [0, len-1]. Endpoints are copied exactly; upsampling is rejected.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> downsample(
    const Eigen::MatrixBase<Derived>& v, Eigen::Index target_len) {
  using S = typename Derived::Scalar;
  using Out = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  const Eigen::Index n = v.size();
  if (target_len < 2) throw InvalidInput("downsample: target_len must be >= 2");
  if (target_len > n) throw InvalidInput("downsample: target_len exceeds input length");
  Out out(target_len);
  const S span = static_cast<S>(n - 1);
  const S denom = static_cast<S>(target_len - 1);
  out(0) = v(0);
  for (Eigen::Index k = 1; k + 1 < target_len; ++k) {
    const S pos = static_cast<S>(k) * span / denom;
    const auto i0 = static_cast<Eigen::Index>(std::floor(pos));
    const S frac = pos - static_cast<S>(i0);
    out(k) = (i0 + 1 < n) ? v(i0) + frac * (v(i0 + 1) - v(i0)) : v(i0);
  }
  out(target_len - 1) = v(n - 1);
  return out;
}

// Newline-delimited record format: one JSON object per line with fields
// id (string), fs (number), samples (array of numbers), labels (object).
std::string record_to_json_line(const PpgRecord& record);
PpgRecord record_from_json_line(const std::string& line);

void write_records(std::ostream& os, const std::vector<PpgRecord>& records);
// Throws DataError naming the 1-based line number on malformed input.
std::vector<PpgRecord> read_records(std::istream& is);

}  // namespace vitppg
