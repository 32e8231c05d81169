#pragma once

#include <cmath>
#include <cstdint>

#include "ddn/common.hpp"

namespace ddn {

// Aggregated click observation for one (target, context) pair.
struct ImpressionRecord {
  long long impressions = 0;  // r
  long long clicks = 0;

  void validate() const {
    if (impressions < 1) throw DataError("impression record needs r >= 1");
    if (clicks < 0 || clicks > impressions)
      throw DataError("clicks must lie in [0, r]");
  }
};

// Guards the delta-method formula against extreme implied probabilities.
inline double clamp_probability(double p) {
  return std::min(1.0 - 1e-6, std::max(1e-6, p));
}

// Standard deviation of the measurement noise of log calibrated CTR after r
// recommendations, as a function of the predictive mean mu only (never the
// realized clicks): sqrt((1-p)/(p*r)) with p = baseline * exp(mu), the
// delta-method spread of log(k/r) for k ~ Binomial(r, p).
double sigma_eps(double mu, long long r, double calibration_baseline);

// Jeffreys-smoothed empirical log calibrated CTR:
// log( ((clicks + 0.5) / (r + 1)) / baseline ).
double empirical_log_ctr(const ImpressionRecord& rec, double calibration_baseline);

}  // namespace ddn
