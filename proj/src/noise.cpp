#include "ddn/noise.hpp"

#include <string>

namespace ddn {

double sigma_eps(double mu, long long r, double calibration_baseline) {
  if (r < 1) throw DataError("sigma_eps: r must be >= 1, got " + std::to_string(r));
  if (!std::isfinite(mu)) throw DataError("sigma_eps: non-finite mu");
  if (!(calibration_baseline > 0.0 && calibration_baseline < 1.0))
    throw ConfigError("calibration baseline must lie in (0,1)");
  double p = clamp_probability(calibration_baseline * std::exp(mu));
  return std::sqrt((1.0 - p) / (p * static_cast<double>(r)));
}

double empirical_log_ctr(const ImpressionRecord& rec, double calibration_baseline) {
  rec.validate();
  if (!(calibration_baseline > 0.0 && calibration_baseline < 1.0))
    throw ConfigError("calibration baseline must lie in (0,1)");
  double smoothed = (static_cast<double>(rec.clicks) + 0.5) /
                    (static_cast<double>(rec.impressions) + 1.0);
  return std::log(smoothed / calibration_baseline);
}

}  // namespace ddn
