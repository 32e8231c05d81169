#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddn/noise.hpp"
#include "ddn/sample.hpp"

namespace ddn {

// Raw aggregated log line before label computation.
struct PoolRecord {
  int target_id = -1;
  TargetFeatures target;
  ContextFeatures context;
  long long r = 0;
  long long clicks = 0;
  double calibration_baseline = 0.0;
  int day = 0;
  double y_clean = std::numeric_limits<double>::quiet_NaN();
};

struct PoolBuildResult {
  std::vector<Sample> samples;
  long dropped_zero_impression = 0;
};

// One Sample per record with r >= 1; labels via the smoothed empirical log
// calibrated CTR. Zero-impression rows are dropped and counted.
PoolBuildResult build_pool(std::span<const PoolRecord> records);

// Target-hashed split: no target id appears on both sides.
std::pair<std::vector<Sample>, std::vector<Sample>> split_pool(std::span<const Sample> pool,
                                                               double validation_fraction,
                                                               uint64_t seed);

struct DatasetManifest {
  int schema_version = 1;
  long records = 0;
  int token_vocab = 0;
  std::vector<int> target_cat_vocabs;
  std::vector<int> context_cat_vocabs;
  int target_real_dim = 0;
  int context_real_dim = 0;
  uint64_t split_seed = 0;
  int day_min = 0;
  int day_max = 0;
  std::vector<double> calibration_baselines;
};

// Text dataset format, one record per line of space-separated key=value
// pairs (lists comma-separated, doubles at full precision):
//   v=1 tid= day= r= clicks= base= y= ytrue= tok= tcat= treal= ccat= creal=
// ytrue is "na" when no clean label exists. A JSON manifest with the fields
// above is written next to the data file as <path>.manifest.json.
void save_dataset(const std::filesystem::path& path, std::span<const Sample> samples,
                  const DatasetManifest& manifest);

struct LoadedDataset {
  std::vector<Sample> samples;
  DatasetManifest manifest;
};

LoadedDataset load_dataset(const std::filesystem::path& path);

}  // namespace ddn
