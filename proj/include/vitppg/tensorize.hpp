#pragma once

#include <array>
#include <string>
#include <string_view>

#include "vitppg/common.hpp"
#include "vitppg/imagify.hpp"

namespace vitppg {

// Every backbone-dependent constant in one place.
struct BackboneProfile {
  std::string name = "dinov3_like";
  std::string preset = "tiny";
  int patch = 16;
  std::array<double, 3> channel_mean{0.485, 0.456, 0.406};
  std::array<double, 3> channel_std{0.229, 0.224, 0.225};
  int n_registers = 4;
  int width = 64;
  int depth = 2;
  int n_heads = 4;
  int mlp_hidden = 256;
  int head_hidden = 64;
  int max_grid = 32;  // rows/cols of the factorized positional tables

  int patch_dim() const { return 3 * patch * patch; }
  void validate() const;
};

// `backbone` is dinov3_like or siglip2_like; `preset` is tiny, small or full.
BackboneProfile make_profile(std::string_view backbone, std::string_view preset);

struct PatchGrid {
  int rows = 0;
  int cols = 0;
  int count() const { return rows * cols; }
};

struct PaddedImage {
  std::array<Matrix, 3> channels;  // H_t x W_t
  MaskGrid valid_mask;
  PatchGrid grid;
  int patch = 16;
  std::string profile_name;
};

// Row i holds the flattened patch i (row-major over the grid); within a patch the
// layout is channel-major, then pixel row, then pixel column.
struct PatchSet {
  Matrix patches;  // N x 3p^2
  MaskVector patch_mask;
  PatchGrid grid;
  int patch = 16;
};

struct TensorizeConfig {
  bool resize = false;  // bilinear resize to (resize_rows, resize_cols) before padding
  int resize_rows = 224;
  int resize_cols = 224;
};

// (I_c - mean_c) / std_c on every pixel.
ImageTriplet normalize_channels(const ImageTriplet& img, const BackboneProfile& profile);

// Zero-pads right/bottom to multiples of the patch size. The mask is the input
// mask on the original region and 0 on padding.
PaddedImage pad_and_mask(const ImageTriplet& img, const BackboneProfile& profile);

PatchSet patchify(const PaddedImage& pimg);

// Inverse of patchify: reassembles the padded channels.
std::array<Matrix, 3> unpatchify(const PatchSet& ps);

// Top-left rows x cols of a padded image.
ImageTriplet crop(const PaddedImage& pimg, Eigen::Index rows, Eigen::Index cols, Representation repr);

// Bilinear resize with corner alignment; the mask follows nearest-neighbour.
ImageTriplet resize_bilinear(const ImageTriplet& img, int rows, int cols);

// normalize -> (optional resize) -> pad -> patchify.
PatchSet prepare_patches(const ImageTriplet& img, const BackboneProfile& profile, const TensorizeConfig& cfg = {});

}  // namespace vitppg
