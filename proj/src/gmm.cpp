#include "ddn/gmm.hpp"

#include <algorithm>
#include <string>

namespace ddn {

void GmmParams::validate() const {
  int k = components();
  if (k < 1) throw ConfigError("mixture needs at least one component");
  if (mus.size() != k || sigmas.size() != k) throw ConfigError("mixture parameter length mismatch");
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    if (alphas(i) < 0.0) throw ConfigError("negative mixture weight");
    if (sigmas(i) < kSigmaFloor - 1e-15)
      throw ConfigError("sigma below floor: " + std::to_string(sigmas(i)));
    sum += alphas(i);
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("mixture weights sum to " + std::to_string(sum));
}

GmmParams head_output_to_gmm(const Vec& raw, double sigma_floor) {
  if (raw.size() % 3 != 0 || raw.size() == 0)
    throw ConfigError("head output length must be 3K, got " + std::to_string(raw.size()));
  int k = static_cast<int>(raw.size() / 3);
  GmmParams g;
  g.alphas = Vec(k);
  g.mus = raw.segment(k, k);
  g.sigmas = Vec(k);
  double m = raw.head(k).maxCoeff();
  double s = 0.0;
  for (int i = 0; i < k; ++i) {
    g.alphas(i) = std::exp(raw(i) - m);
    s += g.alphas(i);
  }
  g.alphas /= s;
  for (int i = 0; i < k; ++i) g.sigmas(i) = softplus(raw(2 * k + i)) + sigma_floor;
  return g;
}

double mixture_mean(const GmmParams& g) { return g.alphas.dot(g.mus); }

double mixture_std(const GmmParams& g) {
  double mean = mixture_mean(g);
  double second = 0.0;
  for (int i = 0; i < g.components(); ++i)
    second += g.alphas(i) * (g.sigmas(i) * g.sigmas(i) + g.mus(i) * g.mus(i));
  double radicand = second - mean * mean;
  if (radicand < -1e-12)
    throw InternalError("mixture variance radicand " + std::to_string(radicand));
  return std::sqrt(std::max(0.0, radicand));
}

namespace {

double gmm_nll_impl(const GmmParams& g, double y, double extra_var) {
  double m = -std::numeric_limits<double>::infinity();
  int k = g.components();
  Vec terms(k);
  for (int i = 0; i < k; ++i) {
    double v = g.sigmas(i) * g.sigmas(i) + extra_var;
    double la = g.alphas(i) > 0.0 ? std::log(g.alphas(i))
                                  : -std::numeric_limits<double>::infinity();
    terms(i) = la + log_normal_pdf(y, g.mus(i), v);
    m = std::max(m, terms(i));
  }
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += std::exp(terms(i) - m);
  return -(m + std::log(s));
}

}  // namespace

double mdn_nll(const GmmParams& g, double y) { return gmm_nll_impl(g, y, 0.0); }

double ddn_nll(const GmmParams& g, double y, double sigma_eps) {
  if (sigma_eps < 0.0) throw ConfigError("sigma_eps must be non-negative");
  return gmm_nll_impl(g, y, sigma_eps * sigma_eps);
}

double mixture_pdf(const GmmParams& g, double y) {
  double p = 0.0;
  for (int i = 0; i < g.components(); ++i) {
    double v = g.sigmas(i) * g.sigmas(i);
    p += g.alphas(i) * std::exp(log_normal_pdf(y, g.mus(i), v));
  }
  return p;
}

}  // namespace ddn
