#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vitppg/signal.hpp"

namespace vitppg {

struct SynthConfig {
  int n_records = 100;
  double fs = 40.0;
  double duration_s = 30.0;
  double hr_min = 50.0, hr_max = 120.0;  // BPM
  double rr_min = 10.0, rr_max = 20.0;   // BRPM
  double noise_std = 0.05;
  double modulation_depth = 0.2;  // respiratory amplitude modulation
  std::uint64_t seed = 0;

  int n_samples() const;
  void validate() const;
};

// Cardiac fundamental at hr/60 Hz plus a half-amplitude second harmonic,
// amplitude-modulated by a respiratory sinusoid at rr/60 Hz, plus Gaussian
// noise. Record i draws from its own stream keyed by (seed, i).
PpgRecord synth_record(const SynthConfig& cfg, int index);
std::vector<PpgRecord> synth_ppg(const SynthConfig& cfg);

std::vector<PpgRecord> load_dataset(const std::string& path);
void save_dataset(const std::string& path, const std::vector<PpgRecord>& records);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

struct DatasetSplit {
  std::vector<PpgRecord> train, val, test;
};

// Seeded permutation partition. val and test take floor(n * fraction) records;
// the remainder goes to train.
SplitIndices split_indices(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed);
DatasetSplit split(const std::vector<PpgRecord>& records, const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace vitppg
