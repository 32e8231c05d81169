#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ddn/model.hpp"

namespace ddn {

enum class SigmaSource : unsigned {
  Data = 1u,
  Model = 2u,
  Measurement = 4u,
};

// Bitmask of SigmaSource flags.
using SigmaSources = unsigned;

inline constexpr SigmaSources kSigmaDataModel =
    static_cast<unsigned>(SigmaSource::Data) | static_cast<unsigned>(SigmaSource::Model);

struct StrategyConfig {
  double epsilon = 0.1;       // exploration traffic share
  double ucb_a = 0.5;         // optimism multiplier
  SigmaSources sigma_sources = kSigmaDataModel;
  long long explore_impression_threshold = 2000;

  void validate() const {
    if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("epsilon must lie in [0,1]");
    if (ucb_a < 0.0) throw ConfigError("UCB multiplier a must be >= 0");
    if (ucb_a > 0.0 && sigma_sources == 0)
      throw ConfigError("UCB with a > 0 needs at least one sigma source");
  }
};

struct ArmScore {
  int target_id = -1;
  double mean = 0.0;
  double std_combined = 0.0;
  double ucb_score = 0.0;
};

// Quadrature combination of the selected uncertainty types.
double combined_sigma(const UncertaintyReport& rep, SigmaSources sources);

ArmScore score_arm(int target_id, const UncertaintyReport& rep, const StrategyConfig& cfg);

using Candidate = std::pair<int, UncertaintyReport>;

// argmax of mean + a * combined sigma; ties break to the smallest target id.
int select_ucb(std::span<const Candidate> candidates, const StrategyConfig& cfg, Rng& rng);

enum class Branch { Exploit, Explore };

// Routes a fraction epsilon of traffic to UCB over the explore pool, the
// rest to the greedy argmax of the exploit pool. An empty explore pool
// always exploits.
std::pair<int, Branch> select_epsilon_split(std::span<const Candidate> exploit_pool,
                                            std::span<const Candidate> explore_pool,
                                            const StrategyConfig& cfg, Rng& rng);

}  // namespace ddn
