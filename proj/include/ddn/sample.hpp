#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "ddn/common.hpp"

namespace ddn {

// Item-side features: hashed title tokens, categorical metadata ids and a
// small dense block.
struct TargetFeatures {
  std::vector<int> token_ids;
  std::vector<int> categorical_ids;
  Vec content_reals;
};

// Placement-side features (publisher id and friends).
struct ContextFeatures {
  std::vector<int> context_ids;
  Vec context_reals;
};

// One aggregated (target, context) observation.
struct Sample {
  int target_id = -1;
  TargetFeatures target;
  ContextFeatures context;
  long long r = 0;
  long long clicks = 0;
  double y = 0.0;                    // empirical log calibrated CTR
  double calibration_baseline = 0.0;
  int day = 0;
  // Ground-truth log calibrated CTR when the row came out of the simulator;
  // NaN for external logs.
  double y_clean = std::numeric_limits<double>::quiet_NaN();

  bool has_clean_label() const { return std::isfinite(y_clean); }
};

}  // namespace ddn
