#include <doctest.h>

#include <random>

#include "vitppg/tensorize.hpp"

using namespace vitppg;

namespace {

ImageTriplet random_image(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> d(0.0, 1.0);
  ImageTriplet img;
  for (auto& c : img.channels) {
    c.resize(rows, cols);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = d(rng);
  }
  img.valid_mask = MaskGrid::Ones(rows, cols);
  return img;
}

ImageTriplet constant_image(double v, Eigen::Index rows = 4, Eigen::Index cols = 4) {
  ImageTriplet img;
  for (auto& c : img.channels) c = Matrix::Constant(rows, cols, v);
  img.valid_mask = MaskGrid::Ones(rows, cols);
  return img;
}

}  // namespace

TEST_CASE("profiles carry the published constants") {
  const auto dino = make_profile("dinov3_like", "full");
  CHECK(dino.patch == 16);
  CHECK(dino.channel_mean == std::array<double, 3>{0.485, 0.456, 0.406});
  CHECK(dino.channel_std == std::array<double, 3>{0.229, 0.224, 0.225});
  CHECK(dino.width == 768);
  CHECK(dino.depth == 12);
  CHECK(dino.n_registers == 4);
  const auto sig = make_profile("siglip2_like", "tiny");
  CHECK(sig.patch == 14);
  CHECK(sig.n_registers == 0);
  CHECK(sig.channel_mean == std::array<double, 3>{0.5, 0.5, 0.5});
  CHECK(sig.width == 64);
  CHECK(make_profile("dinov3_like", "small").width == 128);
  CHECK_THROWS_AS(make_profile("resnet", "tiny"), ConfigError);
  CHECK_THROWS_AS(make_profile("dinov3_like", "huge"), ConfigError);

  auto bad = dino;
  bad.n_heads = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = dino;
  bad.channel_std[1] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("channel normalization fixed points") {
  const auto dino = make_profile("dinov3_like", "tiny");
  const auto sig = make_profile("siglip2_like", "tiny");
  CHECK(normalize_channels(constant_image(0.485), dino).channels[0].isZero(0.0));
  CHECK(normalize_channels(constant_image(0.456), dino).channels[1].isZero(0.0));
  CHECK(normalize_channels(constant_image(0.406), dino).channels[2].isZero(0.0));
  for (const auto& c : normalize_channels(constant_image(0.5), sig).channels) CHECK(c.isZero(0.0));
  for (const auto& c : normalize_channels(constant_image(1.0), sig).channels) CHECK((c.array() == 1.0).all());

  auto img = constant_image(2.0);
  img.valid_mask(1, 1) = 0;
  CHECK(normalize_channels(img, dino).valid_mask == img.valid_mask);
}

TEST_CASE("padding geometry") {
  std::mt19937_64 rng(1);
  const auto img = random_image(rng, 65, 34);
  const auto p16 = pad_and_mask(img, make_profile("dinov3_like", "tiny"));
  CHECK(p16.channels[0].rows() == 80);
  CHECK(p16.channels[0].cols() == 48);
  CHECK(p16.grid.rows == 5);
  CHECK(p16.grid.cols == 3);
  CHECK(p16.grid.count() == 15);
  CHECK(p16.valid_mask.cast<int>().sum() == 65 * 34);
  CHECK(p16.valid_mask.topLeftCorner(65, 34).cast<int>().minCoeff() == 1);

  const auto p14 = pad_and_mask(img, make_profile("siglip2_like", "tiny"));
  CHECK(p14.channels[0].rows() == 70);
  CHECK(p14.channels[0].cols() == 42);
  CHECK(p14.grid.count() == 15);

  const auto exact = pad_and_mask(random_image(rng, 64, 32), make_profile("dinov3_like", "tiny"));
  CHECK(exact.channels[0].rows() == 64);
  CHECK(exact.channels[0].cols() == 32);
  CHECK(exact.valid_mask.cast<int>().minCoeff() == 1);
}

TEST_CASE("patch lengths and validity") {
  std::mt19937_64 rng(2);
  const auto img = random_image(rng, 65, 34);
  const auto ps16 = patchify(pad_and_mask(img, make_profile("dinov3_like", "tiny")));
  CHECK(ps16.patches.cols() == 768);
  CHECK(ps16.patches.rows() == 15);
  // Grid row 4 covers pixel rows 64..79; row 64 is real data.
  CHECK(ps16.patch_mask.cast<int>().sum() == 15);
  const auto ps14 = patchify(pad_and_mask(img, make_profile("siglip2_like", "tiny")));
  CHECK(ps14.patches.cols() == 588);
}

TEST_CASE("flatten order is channel, row, column") {
  ImageTriplet img;
  for (int c = 0; c < 3; ++c) {
    img.channels[c].resize(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int q = 0; q < 4; ++q) img.channels[c](r, q) = 100 * c + 10 * r + q;
  }
  img.valid_mask = MaskGrid::Ones(4, 4);
  auto profile = make_profile("dinov3_like", "tiny");
  profile.patch = 2;
  const auto ps = patchify(pad_and_mask(img, profile));
  REQUIRE(ps.patches.rows() == 4);
  // Patch 1 is grid (0, 1): pixel rows 0-1, cols 2-3.
  const double expect[] = {2, 3, 12, 13, 102, 103, 112, 113, 202, 203, 212, 213};
  for (int k = 0; k < 12; ++k) CHECK(ps.patches(1, k) == expect[k]);
  // Patch 2 is grid (1, 0).
  CHECK(ps.patches(2, 0) == 20);
}

TEST_CASE("patch mask follows the pixel mask") {
  std::mt19937_64 rng(3);
  auto img = random_image(rng, 8, 8);
  img.valid_mask.setZero();
  img.valid_mask(5, 1) = 1;  // only grid cell (1, 0) for p = 4
  auto profile = make_profile("dinov3_like", "tiny");
  profile.patch = 4;
  const auto ps = patchify(pad_and_mask(img, profile));
  CHECK(ps.patch_mask(0) == 0);
  CHECK(ps.patch_mask(1) == 0);
  CHECK(ps.patch_mask(2) == 1);
  CHECK(ps.patch_mask(3) == 0);
}

TEST_CASE("patchify round trip and crop recover the image bitwise") {
  std::mt19937_64 rng(4);
  for (auto backbone : {"dinov3_like", "siglip2_like"}) {
    const auto profile = make_profile(backbone, "tiny");
    for (auto [r, c] : {std::pair{65, 34}, std::pair{240, 240}, std::pair{17, 5}}) {
      const auto img = normalize_channels(random_image(rng, r, c), profile);
      const auto padded = pad_and_mask(img, profile);
      const auto back = unpatchify(patchify(padded));
      for (int k = 0; k < 3; ++k) CHECK(back[k] == padded.channels[k]);
      const auto cropped = crop(padded, r, c, img.repr);
      for (int k = 0; k < 3; ++k) CHECK(cropped.channels[k] == img.channels[k]);
      CHECK(cropped.valid_mask == img.valid_mask);
    }
  }
}

TEST_CASE("valid patch count is monotone in image size") {
  std::mt19937_64 rng(5);
  const auto profile = make_profile("siglip2_like", "tiny");
  int prev_row = 0;
  for (int f = 1; f <= 60; f += 3) {
    const int n = patchify(pad_and_mask(random_image(rng, f, 20), profile)).patch_mask.cast<int>().sum();
    CHECK(n >= prev_row);
    prev_row = n;
  }
  int prev_col = 0;
  for (int t = 1; t <= 60; t += 3) {
    const int n = patchify(pad_and_mask(random_image(rng, 20, t), profile)).patch_mask.cast<int>().sum();
    CHECK(n >= prev_col);
    prev_col = n;
  }
}

TEST_CASE("optional resize") {
  std::mt19937_64 rng(6);
  const auto img = random_image(rng, 65, 34);
  const auto resized = resize_bilinear(img, 224, 224);
  CHECK(resized.rows() == 224);
  CHECK(resized.cols() == 224);
  CHECK(resized.channels[0](0, 0) == img.channels[0](0, 0));
  CHECK(resized.channels[2](223, 223) == img.channels[2](64, 33));

  TensorizeConfig cfg;
  cfg.resize = true;
  const auto ps = prepare_patches(img, make_profile("dinov3_like", "tiny"), cfg);
  CHECK(ps.grid.count() == 14 * 14);
  const auto plain = prepare_patches(img, make_profile("dinov3_like", "tiny"));
  CHECK(plain.grid.count() == 15);
}
