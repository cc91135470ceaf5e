#include "vitppg/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "vitppg/random.hpp"

namespace vitppg {

int SynthConfig::n_samples() const { return static_cast<int>(std::lround(duration_s * fs)); }

void SynthConfig::validate() const {
  if (n_records < 0) throw ConfigError("synth: n_records must be >= 0");
  if (!(fs > 0.0) || !(duration_s > 0.0)) throw ConfigError("synth: fs and duration must be positive");
  if (std::abs(duration_s * fs - std::round(duration_s * fs)) > 1e-9) {
    throw ConfigError("synth: duration * fs must be integral");
  }
  if (!(hr_min > 0.0) || hr_max < hr_min || !(rr_min > 0.0) || rr_max < rr_min) {
    throw ConfigError("synth: rate ranges must be positive and ordered");
  }
  if (2.0 * hr_max / 60.0 >= fs / 2.0) throw ConfigError("synth: second cardiac harmonic exceeds Nyquist");
  if (rr_max / 60.0 >= fs / 2.0) throw ConfigError("synth: respiratory rate exceeds Nyquist");
  if (noise_std < 0.0 || modulation_depth < 0.0) throw ConfigError("synth: noise and modulation must be >= 0");
}

PpgRecord synth_record(const SynthConfig& cfg, int index) {
  auto rng = derived_stream(cfg.seed, {0x73796e74, static_cast<std::uint64_t>(index)});
  auto draw = [&rng](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
  const double hr = draw(cfg.hr_min, cfg.hr_max);
  const double rr = draw(cfg.rr_min, cfg.rr_max);
  const double cardiac_phase = draw(0.0, 2.0 * std::numbers::pi);
  const double resp_phase = draw(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);

  const int n = cfg.n_samples();
  PpgRecord r;
  char id[32];
  std::snprintf(id, sizeof(id), "synth-%05d", index);
  r.id = id;
  r.fs = cfg.fs;
  r.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = i / cfg.fs;
    const double theta = 2.0 * std::numbers::pi * hr / 60.0 * t + cardiac_phase;
    const double cardiac = std::sin(theta) + 0.5 * std::sin(2.0 * theta);
    const double envelope = 1.0 + cfg.modulation_depth * std::sin(2.0 * std::numbers::pi * rr / 60.0 * t + resp_phase);
    r.samples(i) = cardiac * envelope + (cfg.noise_std > 0.0 ? cfg.noise_std * noise(rng) : 0.0);
  }
  r.labels["hr"] = hr;
  r.labels["rr"] = rr;
  return r;
}

std::vector<PpgRecord> synth_ppg(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<PpgRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.n_records));
  for (int i = 0; i < cfg.n_records; ++i) out.push_back(synth_record(cfg, i));
  return out;
}

std::vector<PpgRecord> load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open dataset '" + path + "'");
  return read_records(is);
}

void save_dataset(const std::string& path, const std::vector<PpgRecord>& records) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_records(os, records);
  if (!os) throw DataError("failed writing '" + path + "'");
}

SplitIndices split_indices(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split: fractions must be non-negative");
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must sum to 1");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = derived_stream(seed, {0x73706c74});
  std::shuffle(perm.begin(), perm.end(), rng);

  const auto take = [n](double f) { return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9)); };
  const std::size_t n_val = take(fractions[1]);
  const std::size_t n_test = take(fractions[2]);
  const std::size_t n_train = n - n_val - n_test;
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return s;
}

DatasetSplit split(const std::vector<PpgRecord>& records, const std::array<double, 3>& fractions,
                   std::uint64_t seed) {
  const SplitIndices idx = split_indices(records.size(), fractions, seed);
  DatasetSplit out;
  for (auto i : idx.train) out.train.push_back(records[i]);
  for (auto i : idx.val) out.val.push_back(records[i]);
  for (auto i : idx.test) out.test.push_back(records[i]);
  return out;
}

}  // namespace vitppg
