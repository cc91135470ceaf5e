#include "vitppg/tensorize.hpp"

#include <cmath>

namespace vitppg {

void BackboneProfile::validate() const {
  if (patch < 1) throw ConfigError("profile: patch must be >= 1");
  for (double s : channel_std) {
    if (!(s > 0.0)) throw ConfigError("profile: channel std must be positive");
  }
  if (n_registers < 0) throw ConfigError("profile: register count must be >= 0");
  if (width < 1 || n_heads < 1 || width % n_heads != 0) {
    throw ConfigError("profile: width must be divisible by n_heads");
  }
  if (depth < 0) throw ConfigError("profile: depth must be >= 0");
  if (mlp_hidden < 1 || head_hidden < 1) throw ConfigError("profile: hidden sizes must be >= 1");
  if (max_grid < 1) throw ConfigError("profile: max_grid must be >= 1");
}

BackboneProfile make_profile(std::string_view backbone, std::string_view preset) {
  BackboneProfile p;
  if (backbone == "dinov3_like") {
    p.name = "dinov3_like";
    p.patch = 16;
    p.channel_mean = {0.485, 0.456, 0.406};
    p.channel_std = {0.229, 0.224, 0.225};
    p.n_registers = 4;
  } else if (backbone == "siglip2_like") {
    p.name = "siglip2_like";
    p.patch = 14;
    p.channel_mean = {0.5, 0.5, 0.5};
    p.channel_std = {0.5, 0.5, 0.5};
    p.n_registers = 0;
  } else {
    throw ConfigError("unknown backbone profile '" + std::string(backbone) + "'");
  }

  if (preset == "tiny") {
    p.width = 64, p.depth = 2, p.n_heads = 4;
  } else if (preset == "small") {
    p.width = 128, p.depth = 4, p.n_heads = 4;
  } else if (preset == "full") {
    p.width = 768, p.depth = 12, p.n_heads = 12;
  } else {
    throw ConfigError("unknown preset '" + std::string(preset) + "'");
  }
  p.preset = std::string(preset);
  p.mlp_hidden = 4 * p.width;
  p.head_hidden = p.width;
  return p;
}

ImageTriplet normalize_channels(const ImageTriplet& img, const BackboneProfile& profile) {
  ImageTriplet out = img;
  for (int c = 0; c < 3; ++c) {
    out.channels[c] = ((img.channels[c].array() - profile.channel_mean[c]) / profile.channel_std[c]).matrix();
  }
  return out;
}

PaddedImage pad_and_mask(const ImageTriplet& img, const BackboneProfile& profile) {
  const int p = profile.patch;
  const auto rows = img.rows();
  const auto cols = img.cols();
  if (rows < 1 || cols < 1) throw InvalidInput("pad_and_mask: empty image");
  const int grid_rows = static_cast<int>((rows + p - 1) / p);
  const int grid_cols = static_cast<int>((cols + p - 1) / p);

  PaddedImage out;
  out.patch = p;
  out.grid = {grid_rows, grid_cols};
  out.profile_name = profile.name;
  const Eigen::Index ht = static_cast<Eigen::Index>(grid_rows) * p;
  const Eigen::Index wt = static_cast<Eigen::Index>(grid_cols) * p;
  for (int c = 0; c < 3; ++c) {
    out.channels[c] = Matrix::Zero(ht, wt);
    out.channels[c].topLeftCorner(rows, cols) = img.channels[c];
  }
  out.valid_mask = MaskGrid::Zero(ht, wt);
  out.valid_mask.topLeftCorner(rows, cols) = img.valid_mask;
  return out;
}

PatchSet patchify(const PaddedImage& pimg) {
  const int p = pimg.patch;
  const int n = pimg.grid.count();
  PatchSet ps;
  ps.patch = p;
  ps.grid = pimg.grid;
  ps.patches.resize(n, 3 * p * p);
  ps.patch_mask = MaskVector::Zero(n);
  for (int gr = 0; gr < pimg.grid.rows; ++gr) {
    for (int gc = 0; gc < pimg.grid.cols; ++gc) {
      const int idx = gr * pimg.grid.cols + gc;
      Eigen::Index k = 0;
      for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < p; ++r) {
          for (int q = 0; q < p; ++q) ps.patches(idx, k++) = pimg.channels[c](gr * p + r, gc * p + q);
        }
      }
      ps.patch_mask(idx) = pimg.valid_mask.block(gr * p, gc * p, p, p).any() ? 1 : 0;
    }
  }
  return ps;
}

std::array<Matrix, 3> unpatchify(const PatchSet& ps) {
  const int p = ps.patch;
  std::array<Matrix, 3> out;
  for (auto& ch : out) ch.resize(static_cast<Eigen::Index>(ps.grid.rows) * p, static_cast<Eigen::Index>(ps.grid.cols) * p);
  for (int gr = 0; gr < ps.grid.rows; ++gr) {
    for (int gc = 0; gc < ps.grid.cols; ++gc) {
      const int idx = gr * ps.grid.cols + gc;
      Eigen::Index k = 0;
      for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < p; ++r) {
          for (int q = 0; q < p; ++q) out[c](gr * p + r, gc * p + q) = ps.patches(idx, k++);
        }
      }
    }
  }
  return out;
}

ImageTriplet crop(const PaddedImage& pimg, Eigen::Index rows, Eigen::Index cols, Representation repr) {
  ImageTriplet out;
  for (int c = 0; c < 3; ++c) out.channels[c] = pimg.channels[c].topLeftCorner(rows, cols);
  out.valid_mask = pimg.valid_mask.topLeftCorner(rows, cols);
  out.repr = repr;
  return out;
}

ImageTriplet resize_bilinear(const ImageTriplet& img, int rows, int cols) {
  if (rows < 1 || cols < 1) throw ConfigError("resize: target size must be positive");
  const auto in_rows = img.rows();
  const auto in_cols = img.cols();
  auto coord = [](int k, int out_n, Eigen::Index in_n) {
    return out_n > 1 ? static_cast<double>(k) * static_cast<double>(in_n - 1) / (out_n - 1) : 0.0;
  };
  ImageTriplet out;
  out.repr = img.repr;
  out.valid_mask.resize(rows, cols);
  for (auto& ch : out.channels) ch.resize(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const double y = coord(r, rows, in_rows);
    const auto y0 = static_cast<Eigen::Index>(std::floor(y));
    const auto y1 = std::min<Eigen::Index>(y0 + 1, in_rows - 1);
    const double fy = y - static_cast<double>(y0);
    for (int q = 0; q < cols; ++q) {
      const double x = coord(q, cols, in_cols);
      const auto x0 = static_cast<Eigen::Index>(std::floor(x));
      const auto x1 = std::min<Eigen::Index>(x0 + 1, in_cols - 1);
      const double fx = x - static_cast<double>(x0);
      for (int c = 0; c < 3; ++c) {
        const Matrix& m = img.channels[c];
        const double top = m(y0, x0) + fx * (m(y0, x1) - m(y0, x0));
        const double bottom = m(y1, x0) + fx * (m(y1, x1) - m(y1, x0));
        out.channels[c](r, q) = top + fy * (bottom - top);
      }
      out.valid_mask(r, q) = img.valid_mask(static_cast<Eigen::Index>(std::lround(y)),
                                            static_cast<Eigen::Index>(std::lround(x)));
    }
  }
  return out;
}

PatchSet prepare_patches(const ImageTriplet& img, const BackboneProfile& profile, const TensorizeConfig& cfg) {
  ImageTriplet normalized = normalize_channels(img, profile);
  if (cfg.resize) normalized = resize_bilinear(normalized, cfg.resize_rows, cfg.resize_cols);
  return patchify(pad_and_mask(normalized, profile));
}

}  // namespace vitppg
