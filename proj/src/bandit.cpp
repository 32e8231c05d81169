#include "ddn/bandit.hpp"

#include <cmath>

namespace ddn {

double combined_sigma(const UncertaintyReport& rep, SigmaSources sources) {
  if (sources == 0) throw ConfigError("combined_sigma: no sigma sources selected");
  double v = 0.0;
  if (sources & static_cast<unsigned>(SigmaSource::Data)) v += rep.data_std * rep.data_std;
  if (sources & static_cast<unsigned>(SigmaSource::Model)) v += rep.model_std * rep.model_std;
  if (sources & static_cast<unsigned>(SigmaSource::Measurement))
    v += rep.measurement_std * rep.measurement_std;
  return std::sqrt(v);
}

ArmScore score_arm(int target_id, const UncertaintyReport& rep, const StrategyConfig& cfg) {
  ArmScore s;
  s.target_id = target_id;
  s.mean = rep.mean;
  s.std_combined = cfg.ucb_a > 0.0 ? combined_sigma(rep, cfg.sigma_sources) : 0.0;
  s.ucb_score = s.mean + cfg.ucb_a * s.std_combined;
  return s;
}

int select_ucb(std::span<const Candidate> candidates, const StrategyConfig& cfg, Rng&) {
  if (candidates.empty()) throw UsageError("select_ucb: empty candidate list");
  cfg.validate();
  int best_id = -1;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [id, rep] : candidates) {
    double score = score_arm(id, rep, cfg).ucb_score;
    if (score > best || (score == best && (best_id < 0 || id < best_id))) {
      best = score;
      best_id = id;
    }
  }
  return best_id;
}

std::pair<int, Branch> select_epsilon_split(std::span<const Candidate> exploit_pool,
                                            std::span<const Candidate> explore_pool,
                                            const StrategyConfig& cfg, Rng& rng) {
  cfg.validate();
  if (exploit_pool.empty() && explore_pool.empty())
    throw UsageError("select_epsilon_split: both pools empty");
  bool explore = false;
  if (!explore_pool.empty() && cfg.epsilon > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    explore = u(rng) < cfg.epsilon;
  }
  if (explore) return {select_ucb(explore_pool, cfg, rng), Branch::Explore};

  if (exploit_pool.empty()) return {select_ucb(explore_pool, cfg, rng), Branch::Explore};
  // Greedy over the exploit pool: UCB with a = 0.
  StrategyConfig greedy = cfg;
  greedy.ucb_a = 0.0;
  return {select_ucb(exploit_pool, greedy, rng), Branch::Exploit};
}

}  // namespace ddn
