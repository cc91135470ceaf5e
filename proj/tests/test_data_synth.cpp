#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "vitppg/data_synth.hpp"
#include "vitppg/imagify.hpp"

using namespace vitppg;

namespace {

std::vector<double> as_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "vitppg_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

SynthConfig clean(double hr, double rr) {
  SynthConfig cfg;
  cfg.n_records = 1;
  cfg.noise_std = 0.0;
  cfg.hr_min = cfg.hr_max = hr;
  cfg.rr_min = cfg.rr_max = rr;
  return cfg;
}

}  // namespace

TEST_CASE("records have the expected framing and labels") {
  SynthConfig cfg;
  cfg.n_records = 20;
  cfg.seed = 3;
  const auto records = synth_ppg(cfg);
  REQUIRE(records.size() == 20);
  for (const auto& r : records) {
    CHECK(r.samples.size() == 1200);
    CHECK(r.fs == 40.0);
    CHECK(r.labels.at("hr") >= 50.0);
    CHECK(r.labels.at("hr") <= 120.0);
    CHECK(r.labels.at("rr") >= 10.0);
    CHECK(r.labels.at("rr") <= 20.0);
  }
  CHECK(records[7].id == "synth-00007");
}

TEST_CASE("generation is deterministic") {
  SynthConfig cfg;
  cfg.seed = 12;
  const auto a = synth_ppg(cfg);
  const auto b = synth_ppg(cfg);
  REQUIRE(a.size() == 100);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].samples == b[i].samples);
    CHECK(a[i].labels == b[i].labels);
  }
  cfg.seed = 13;
  CHECK(synth_ppg(cfg)[0].samples != a[0].samples);
}

TEST_CASE("a 90 BPM record peaks at bin 5 in every frame") {
  const auto r = synth_record(clean(90.0, 12.0), 0);
  const auto ref = oracle::brute_stft(as_std(r.samples), 128, 32, 128, 1, true);
  for (std::size_t t = 0; t < ref[0].size(); ++t) {
    std::vector<long double> mag(ref.size());
    for (std::size_t f = 0; f < ref.size(); ++f) mag[f] = std::abs(ref[f][t]);
    CHECK(oracle::argmax(mag) == 5);
  }
  StftConfig cfg;
  const auto spec = stft(r.samples, cfg);
  for (Eigen::Index t = 0; t < spec.values.cols(); ++t) {
    Eigen::Index best;
    spec.values.col(t).cwiseAbs().maxCoeff(&best);
    CHECK(best == 5);
  }
}

TEST_CASE("respiratory envelope has the requested period") {
  const auto r = synth_record(clean(72.0, 12.0), 0);
  // Per-beat peak amplitude: maximum over each cardiac period.
  const int beat = static_cast<int>(std::lround(40.0 * 60.0 / 72.0));
  std::vector<double> envelope;
  for (int s = 0; s + beat <= 1200; s += beat) envelope.push_back(r.samples.segment(s, beat).maxCoeff());
  const double beat_s = beat / 40.0;
  const double period_s = oracle::dominant_period(envelope) * beat_s;
  CHECK(std::abs(period_s - 5.0) <= 0.5);
}

TEST_CASE("heart rate is recoverable from the spectrum") {
  SynthConfig cfg;
  cfg.n_records = 25;
  cfg.noise_std = 0.0;
  cfg.seed = 8;
  for (const auto& r : synth_ppg(cfg)) {
    const double hz = oracle::welch_peak_hz(as_std(r.samples), 40.0, 400, 4096, 0.7, 2.2);
    CHECK(std::abs(hz * 60.0 - r.labels.at("hr")) <= 2.0);
  }
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.fs = 4.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.hr_min = 130.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.duration_s = 30.01;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.noise_std = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("splits are seeded disjoint partitions") {
  const auto s = split_indices(10, {0.8, 0.1, 0.1}, 5);
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);

  for (std::size_t n : {1u, 7u, 10u, 97u, 500u}) {
    const auto p = split_indices(n, {0.7, 0.2, 0.1}, 42);
    std::vector<std::size_t> all;
    for (const auto* part : {&p.train, &p.val, &p.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(n);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
    const auto q = split_indices(n, {0.7, 0.2, 0.1}, 42);
    CHECK(p.train == q.train);
    CHECK(p.val == q.val);
    CHECK(p.test == q.test);
  }
  CHECK(split_indices(100, {0.8, 0.1, 0.1}, 1).val != split_indices(100, {0.8, 0.1, 0.1}, 2).val);
  CHECK_THROWS_AS(split_indices(10, {0.8, 0.3, 0.1}, 1), ConfigError);
  CHECK_THROWS_AS(split_indices(10, {0.8, -0.1, 0.3}, 1), ConfigError);

  SynthConfig cfg;
  cfg.n_records = 10;
  const auto records = synth_ppg(cfg);
  const auto parts = split(records, {0.8, 0.1, 0.1}, 5);
  CHECK(parts.val[0].id == records[s.val[0]].id);
}

TEST_CASE("datasets round-trip through files") {
  SynthConfig cfg;
  cfg.n_records = 50;
  cfg.seed = 77;
  auto records = synth_ppg(cfg);
  records[3].labels["lactate"] = 1.75;  // open label vocabulary
  const auto path = scratch("roundtrip.jsonl");
  save_dataset(path.string(), records);
  const auto back = load_dataset(path.string());
  REQUIRE(back.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(back[i].id == records[i].id);
    CHECK(std::memcmp(back[i].samples.data(), records[i].samples.data(), 1200 * sizeof(double)) == 0);
    CHECK(back[i].labels == records[i].labels);
  }
  CHECK(back[3].labels.at("lactate") == 1.75);
}

TEST_CASE("malformed dataset files name the line") {
  const auto path = scratch("broken.jsonl");
  {
    std::ofstream os(path);
    os << R"({"id":"a","fs":40,"samples":[1,2],"labels":{"hr":60}})" << "\n";
    os << R"({"id":"b","fs":40,"samples":"oops","labels":{}})" << "\n";
  }
  try {
    load_dataset(path.string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_dataset((scratch("nope") / "missing.jsonl").string()), DataError);
}
