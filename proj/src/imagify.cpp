#include "vitppg/imagify.hpp"

#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace vitppg {

std::string_view to_string(WindowKind kind) {
  switch (kind) {
    case WindowKind::rectangular: return "rectangular";
    case WindowKind::hann: return "hann";
    case WindowKind::hamming: return "hamming";
  }
  return "unknown";
}

std::string_view to_string(Representation repr) {
  switch (repr) {
    case Representation::stft: return "stft";
    case Representation::stft_phase: return "stft_phase";
    case Representation::recurrence: return "recurrence";
  }
  return "unknown";
}

WindowKind parse_window_kind(std::string_view name) {
  if (name == "rectangular" || name == "rect" || name == "boxcar") return WindowKind::rectangular;
  if (name == "hann") return WindowKind::hann;
  if (name == "hamming") return WindowKind::hamming;
  throw ConfigError("unknown window kind '" + std::string(name) + "'");
}

Representation parse_representation(std::string_view name) {
  if (name == "stft") return Representation::stft;
  if (name == "stft_phase") return Representation::stft_phase;
  if (name == "recurrence") return Representation::recurrence;
  throw ConfigError("unknown representation '" + std::string(name) + "'");
}

int StftConfig::n_frames(Eigen::Index len) const {
  if (len < n_window) return 0;
  return static_cast<int>((len - n_window) / hop) + 1;
}

void StftConfig::validate() const {
  if (n_window <= 0 || n_window > n_fft) throw ConfigError("stft: require 0 < n_window <= n_fft");
  if (hop <= 0 || hop > n_window) throw ConfigError("stft: require 0 < hop <= n_window");
  if (!(eps > 0.0)) throw ConfigError("stft: eps must be positive");
}

void RecurrenceConfig::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("recurrence: sigma must be positive");
  if (target_len < 3) throw ConfigError("recurrence: target_len must be >= 3");
}

Vector make_window(WindowKind kind, int n) {
  Vector w(n);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int m = 0; m < n; ++m) {
    const double c = std::cos(two_pi * m / n);
    switch (kind) {
      case WindowKind::rectangular: w(m) = 1.0; break;
      case WindowKind::hann: w(m) = 0.5 - 0.5 * c; break;
      case WindowKind::hamming: w(m) = 0.54 - 0.46 * c; break;
    }
  }
  return w;
}

ComplexSpectrogram stft(const Vector& x, const StftConfig& cfg) {
  cfg.validate();
  if (x.size() < cfg.n_window) throw InvalidInput("stft: signal shorter than one window");
  if (!x.allFinite()) throw InvalidInput("stft: non-finite sample");

  const int frames = cfg.n_frames(x.size());
  const int bins = cfg.n_bins();
  const Vector w = make_window(cfg.window, cfg.n_window);

  ComplexSpectrogram out{Eigen::MatrixXcd(bins, frames), cfg};
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> frame(static_cast<std::size_t>(cfg.n_fft));
  std::vector<std::complex<double>> spectrum;
  for (int t = 0; t < frames; ++t) {
    std::fill(frame.begin(), frame.end(), std::complex<double>(0.0, 0.0));
    const Eigen::Index start = static_cast<Eigen::Index>(t) * cfg.hop;
    for (int m = 0; m < cfg.n_window; ++m) frame[static_cast<std::size_t>(m)] = x(start + m) * w(m);
    fft.fwd(spectrum, frame);
    for (int f = 0; f < bins; ++f) out.values(f, t) = spectrum[static_cast<std::size_t>(f)];
  }
  return out;
}

Matrix log_power(const ComplexSpectrogram& spec) {
  const double eps = spec.config.eps;
  return spec.values.unaryExpr([eps](const std::complex<double>& z) { return std::log(std::norm(z) + eps); });
}

Matrix phase(const ComplexSpectrogram& spec) {
  return spec.values.unaryExpr([](const std::complex<double>& z) {
    if (z.real() == 0.0 && z.imag() == 0.0) return 0.0;
    return std::atan2(z.imag(), z.real());
  });
}

namespace {

ImageTriplet triplet(Matrix c1, Matrix c2, Matrix c3, Representation repr) {
  ImageTriplet img;
  img.valid_mask = MaskGrid::Ones(c1.rows(), c1.cols());
  img.channels = {std::move(c1), std::move(c2), std::move(c3)};
  img.repr = repr;
  return img;
}

}  // namespace

ImageTriplet make_stft_image(const Vector& x, const StftConfig& cfg) {
  const Matrix image = zscore(log_power(stft(x, cfg)));
  return triplet(image, image, image, Representation::stft);
}

ImageTriplet make_stft_phase_image(const Vector& x, const StftConfig& cfg) {
  const ComplexSpectrogram spec = stft(x, cfg);
  const Matrix phi = phase(spec);
  return triplet(zscore(log_power(spec)), zscore(Matrix(phi.array().cos())), zscore(Matrix(phi.array().sin())),
                 Representation::stft_phase);
}

namespace {

Vector left_pad(const Vector& v, Eigen::Index len) {
  Vector out(len);
  const Eigen::Index pad = len - v.size();
  out.head(pad).setConstant(v(0));
  out.tail(v.size()) = v;
  return out;
}

}  // namespace

std::array<Vector, 3> recurrence_sequences(const Vector& x, const RecurrenceConfig& cfg) {
  cfg.validate();
  if (x.size() < cfg.target_len) throw InvalidInput("recurrence: target_len exceeds signal length");
  const Vector xt = downsample(zscore(x), cfg.target_len);
  return {xt, left_pad(discrete_diff(xt, 1), cfg.target_len), left_pad(discrete_diff(xt, 2), cfg.target_len)};
}

ImageTriplet make_recurrence_image(const Vector& x, const RecurrenceConfig& cfg) {
  const auto seq = recurrence_sequences(x, cfg);
  return triplet(zscore(recurrence_matrix(seq[0], cfg.sigma)), zscore(recurrence_matrix(seq[1], cfg.sigma)),
                 zscore(recurrence_matrix(seq[2], cfg.sigma)), Representation::recurrence);
}

ImageTriplet make_image(const Vector& x, const ImagifyConfig& cfg) {
  switch (cfg.repr) {
    case Representation::stft: return make_stft_image(x, cfg.stft);
    case Representation::stft_phase: return make_stft_phase_image(x, cfg.stft);
    case Representation::recurrence: return make_recurrence_image(x, cfg.recurrence);
  }
  throw ConfigError("unknown representation");
}

}  // namespace vitppg
