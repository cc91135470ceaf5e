#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "vitppg/common.hpp"
#include "vitppg/signal.hpp"

namespace vitppg {

enum class WindowKind { rectangular, hann, hamming };
enum class Representation { stft, stft_phase, recurrence };

std::string_view to_string(WindowKind kind);
std::string_view to_string(Representation repr);
WindowKind parse_window_kind(std::string_view name);
Representation parse_representation(std::string_view name);

struct StftConfig {
  int n_window = 128;
  int hop = 32;
  int n_fft = 128;
  WindowKind window = WindowKind::hann;
  double eps = 1e-10;
  bool one_sided = true;

  int n_bins() const { return one_sided ? n_fft / 2 + 1 : n_fft; }
  // Frame count for a signal of `len` samples; 0 when the signal is shorter than one window.
  int n_frames(Eigen::Index len) const;
  void validate() const;
};

// Periodic (DFT-even) windows of length n.
Vector make_window(WindowKind kind, int n);

struct ComplexSpectrogram {
  Eigen::MatrixXcd values;  // bins x frames
  StftConfig config;
};

struct RecurrenceConfig {
  double sigma = 1.0;   // bandwidth in z-scored amplitude units
  int target_len = 240; // K, sequence length after downsampling

  void validate() const;
};

struct ImagifyConfig {
  Representation repr = Representation::stft;
  StftConfig stft;
  RecurrenceConfig recurrence;
};

// Three equally shaped channels plus a per-pixel validity mask (1 = real data).
struct ImageTriplet {
  std::array<Matrix, 3> channels;
  MaskGrid valid_mask;
  Representation repr = Representation::stft;

  Eigen::Index rows() const { return valid_mask.rows(); }
  Eigen::Index cols() const { return valid_mask.cols(); }
};

// Windowed, zero-padded DFT per frame:
//   X(f, t) = sum_{m < n_window} x[t*hop + m] w[m] exp(-j 2 pi f m / n_fft).
ComplexSpectrogram stft(const Vector& x, const StftConfig& cfg);

// log(|X|^2 + eps)
Matrix log_power(const ComplexSpectrogram& spec);
// atan2(Im X, Re X) with atan2(0, 0) := 0.
Matrix phase(const ComplexSpectrogram& spec);

ImageTriplet make_stft_image(const Vector& x, const StftConfig& cfg);
ImageTriplet make_stft_phase_image(const Vector& x, const StftConfig& cfg);

// Gaussian-soft recurrence R(i, j) = exp(-(v[i] - v[j])^2 / (2 sigma^2)).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> recurrence_matrix(
    const Eigen::MatrixBase<Derived>& v, typename Derived::Scalar sigma) {
  using S = typename Derived::Scalar;
  if (!(sigma > 0)) throw ConfigError("recurrence_matrix: sigma must be positive");
  const Eigen::Index n = v.size();
  if (n < 2) throw InvalidInput("recurrence_matrix: sequence needs at least 2 samples");
  const S inv = S(1) / (S(2) * sigma * sigma);
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> r(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    r(j, j) = S(1);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const S d = v(i) - v(j);
      r(i, j) = std::exp(-d * d * inv);
      r(j, i) = r(i, j);
    }
  }
  return r;
}

// Sequences feeding the three recurrence channels: z-scored signal downsampled
// to K, then its slope and curvature left-padded by edge replication to K.
std::array<Vector, 3> recurrence_sequences(const Vector& x, const RecurrenceConfig& cfg);

ImageTriplet make_recurrence_image(const Vector& x, const RecurrenceConfig& cfg);

ImageTriplet make_image(const Vector& x, const ImagifyConfig& cfg);

}  // namespace vitppg
