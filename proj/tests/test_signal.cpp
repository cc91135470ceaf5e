#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <cstring>
#include <sstream>

#include "oracles.hpp"
#include "vitppg/signal.hpp"

using namespace vitppg;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0, double shift = 0.0) {
  std::normal_distribution<double> d(shift, scale);
  Vector v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("zscore uses the population standard deviation") {
  const Vector z = zscore(vec({1, 2, 3}));
  CHECK(z(0) == doctest::Approx(-1.224744871391589).epsilon(1e-12));
  CHECK(z(1) == 0.0);
  CHECK(z(2) == doctest::Approx(1.224744871391589).epsilon(1e-12));
}

TEST_CASE("zscore maps constant input to zeros") {
  CHECK(zscore(vec({5, 5, 5})) == Vector::Zero(3));
}

TEST_CASE("zscore rejects empty and non-finite input") {
  CHECK_THROWS_AS(zscore(Vector()), InvalidInput);
  CHECK_THROWS_AS(zscore(vec({1, std::numeric_limits<double>::quiet_NaN()})), InvalidInput);
  CHECK_THROWS_AS(zscore(vec({1, std::numeric_limits<double>::infinity()})), InvalidInput);
}

TEST_CASE("zscore output statistics, idempotence and affine invariance") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector v = random_vector(rng, 1200, 3.0, 7.0);
    const Vector z = zscore(v);
    long double mean = 0, sq = 0;
    for (double x : z) mean += x;
    mean /= z.size();
    for (double x : z) sq += (x - mean) * (x - mean);
    const double sd = std::sqrt(static_cast<double>(sq / z.size()));
    CHECK(std::abs(static_cast<double>(mean)) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-9);

    CHECK((zscore(z) - z).cwiseAbs().maxCoeff() < 1e-9);

    std::uniform_real_distribution<double> ua(0.1, 10.0), ub(-50.0, 50.0);
    const double a = ua(rng), b = ub(rng);
    const Vector affine = (a * v.array() + b).matrix();
    CHECK((zscore(affine) - z).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("discrete differences") {
  CHECK(discrete_diff(vec({0, 1, 3}), 1) == vec({1, 2}));
  CHECK(discrete_diff(vec({0, 1, 3}), 2) == vec({1}));
  CHECK(discrete_diff(vec({0, 2, 4, 6}), 2) == vec({0, 0}));
  CHECK_THROWS_AS(discrete_diff(vec({1, 2}), 2), InvalidInput);
  CHECK_THROWS_AS(discrete_diff(vec({1}), 1), InvalidInput);
  CHECK_THROWS_AS(discrete_diff(vec({1, 2, 3}), 3), InvalidInput);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector v = random_vector(rng, 50);
    CHECK(discrete_diff(v, 2) == discrete_diff(discrete_diff(v, 1), 1));
  }
}

TEST_CASE("downsample by linear interpolation") {
  CHECK(downsample(vec({0, 1, 2, 3}), 4) == vec({0, 1, 2, 3}));
  CHECK(downsample(vec({0, 1, 2, 3, 4}), 3) == vec({0, 2, 4}));
  CHECK_THROWS_AS(downsample(vec({0, 1, 2}), 4), InvalidInput);
  CHECK_THROWS_AS(downsample(vec({0, 1, 2}), 1), InvalidInput);

  // One second of a 1 Hz sine at 1200 points. At 40 Hz the linear interpolation error
  // alone is (2*pi/40)^2/8 ~ 3e-3, so the bound only holds on a dense grid.
  const double fs = 1200.0;
  Vector s(1200);
  for (int i = 0; i < 1200; ++i) s(i) = std::sin(2.0 * std::numbers::pi * i / fs);
  const Vector d = downsample(s, 240);
  double worst = 0.0;
  for (int k = 0; k < 240; ++k) {
    const double pos = k * 1199.0 / 239.0;
    worst = std::max(worst, std::abs(d(k) - std::sin(2.0 * std::numbers::pi * pos / fs)));
  }
  CHECK(worst < 1e-3);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector v = random_vector(rng, 37 + trial * 13);
    const Vector out = downsample(v, 2 + trial * 3);
    CHECK(out(0) == v(0));
    CHECK(out(out.size() - 1) == v(v.size() - 1));
  }
}

TEST_CASE("record validation") {
  PpgRecord r{"a", 40.0, vec({1, 2}), {}};
  CHECK_NOTHROW(r.validate());
  r.fs = 0.0;
  CHECK_THROWS_AS(r.validate(), InvalidInput);
  r.fs = 40.0;
  r.samples = Vector();
  CHECK_THROWS_AS(r.validate(), InvalidInput);
}

TEST_CASE("record lines round-trip finite doubles bit-exactly") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::uint64_t> bits;
  std::vector<PpgRecord> records;
  for (int i = 0; i < 20; ++i) {
    PpgRecord r;
    r.id = "rec-" + std::to_string(i);
    r.fs = 40.0 + i * 0.1;
    r.samples.resize(64);
    for (auto& x : r.samples) {
      double v;
      do {
        const std::uint64_t b = bits(rng);
        std::memcpy(&v, &b, sizeof v);
      } while (!std::isfinite(v));
      x = v;
    }
    r.samples(0) = std::numeric_limits<double>::denorm_min();
    r.samples(1) = -0.0;
    r.labels["hr"] = 1.0 / 3.0;
    r.labels["custom_marker"] = -1e300;
    records.push_back(r);
  }
  std::stringstream ss;
  write_records(ss, records);
  const auto loaded = read_records(ss);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].id == records[i].id);
    CHECK(loaded[i].fs == records[i].fs);
    CHECK(std::memcmp(loaded[i].samples.data(), records[i].samples.data(), 64 * sizeof(double)) == 0);
    CHECK(loaded[i].labels == records[i].labels);
  }
}

TEST_CASE("malformed record lines report the line number") {
  std::stringstream ss;
  ss << R"({"id":"a","fs":40,"samples":[1,2,3],"labels":{}})" << "\n";
  ss << "\n";
  ss << R"({"id":"b","fs":40,"samples":[1,2,)" << "\n";
  try {
    read_records(ss);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  std::stringstream bad_fs;
  bad_fs << R"({"id":"z","fs":-1,"samples":[1],"labels":{}})" << "\n";
  CHECK_THROWS_AS(read_records(bad_fs), DataError);
}
