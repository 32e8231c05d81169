#pragma once

#include <cmath>
#include <limits>

#include "ddn/common.hpp"

namespace ddn {

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

inline double softplus(double x) {
  // log(1 + e^x), stable on both tails.
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_normal_pdf(double y, double mu, double var) {
  double d = y - mu;
  return -0.5 * (kLog2Pi + std::log(var)) - d * d / (2.0 * var);
}

// Predictive mixture: weights, means and standard deviations in log
// calibrated CTR units.
struct GmmParams {
  Vec alphas;
  Vec mus;
  Vec sigmas;

  int components() const { return static_cast<int>(alphas.size()); }
  void validate() const;
};

// Maps a raw head output of length 3K onto mixture parameters:
// alphas via softmax, sigmas via softplus + floor, mus unconstrained.
GmmParams head_output_to_gmm(const Vec& raw, double sigma_floor = kSigmaFloor);

double mixture_mean(const GmmParams& g);
// sqrt( sum_i a_i (s_i^2 + m_i^2) - mean^2 ); tiny negative radicand clamps
// to 0, anything below -1e-12 is an internal error.
double mixture_std(const GmmParams& g);

// -log sum_i a_i N(y; mu_i, s_i^2), via log-sum-exp.
double mdn_nll(const GmmParams& g, double y);
// Same with effective variance s_i^2 + sigma_eps^2; sigma_eps is exogenous.
double ddn_nll(const GmmParams& g, double y, double sigma_eps);

inline double reg_mse(double prediction, double y) {
  double d = prediction - y;
  return d * d;
}

// Mixture density at y (no log); used by tests as a direct oracle target.
double mixture_pdf(const GmmParams& g, double y);

}  // namespace ddn
