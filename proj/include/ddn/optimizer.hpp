#pragma once

#include <vector>

#include "ddn/tape.hpp"

namespace ddn::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer with bias correction. Moment slots are laid out
// lazily on the first step and afterwards pinned to the store's parameter
// order; the step counter is strictly increasing.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  AdamConfig& config() { return cfg_; }
  const AdamConfig& config() const { return cfg_; }
  long step_count() const { return t_; }

  // Applies one update from the gradients currently held by the store.
  // A non-finite gradient aborts, naming the offending parameter.
  void step(ParamStore& store);

  void reset() {
    t_ = 0;
    m_.clear();
    v_.clear();
  }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
};

}  // namespace ddn::nn
