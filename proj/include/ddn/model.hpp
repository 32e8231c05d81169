#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddn/gmm.hpp"
#include "ddn/noise.hpp"
#include "ddn/optimizer.hpp"
#include "ddn/sample.hpp"
#include "ddn/tape.hpp"

namespace ddn {

enum class LossKind { Reg, Mdn, Ddn };

std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& s);

// Where the predictive mean feeding sigma_eps comes from during training.
enum class NoiseMuSource { Model, Empirical };

struct ModelConfig {
  int token_vocab = 2048;
  int token_dim = 16;
  int cat_dim = 8;
  std::vector<int> target_cat_vocabs = {8, 64};
  std::vector<int> context_cat_vocabs = {8};
  int target_real_dim = 2;
  int context_real_dim = 0;
  std::vector<int> hidden = {64, 32};  // per subnet; the last entry is the descriptor dim
  int fusion_dim = 32;
  int mixture_components = 3;
  double dropout_rate = 0.25;
  int mc_passes = 30;  // T
  double sigma_floor = kSigmaFloor;
  NoiseMuSource noise_mu_source = NoiseMuSource::Model;

  int descriptor_dim() const { return hidden.empty() ? 0 : hidden.back(); }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Batched feature columns; rows align across members.
struct FeatureBatch {
  std::vector<std::vector<int>> token_ids;          // per row
  std::vector<std::vector<int>> target_cats;        // per feature, then per row
  Mat target_reals;                                 // B x target_real_dim
  std::vector<std::vector<int>> context_cats;       // per feature, then per row
  Mat context_reals;                                // B x context_real_dim

  Eigen::Index rows() const { return static_cast<Eigen::Index>(token_ids.size()); }

  static FeatureBatch from_samples(std::span<const Sample> samples, const ModelConfig& cfg);
  static FeatureBatch from_features(std::span<const TargetFeatures> targets,
                                    const ContextFeatures& shared_context,
                                    const ModelConfig& cfg);
};

// Dropout masks (and post-activation values) of one forward pass; replaying
// the masks reproduces the pass bit-exactly.
struct ForwardTrace {
  std::vector<Mat> dropout_masks;
  std::vector<Mat> activations;
};

// Separated uncertainty estimate for one (target, context) pair.
struct UncertaintyReport {
  double mean = 0.0;
  double data_std = 0.0;
  double model_std = 0.0;
  double measurement_std = 0.0;
  GmmParams gmm;
  bool model_std_valid = false;  // false when T < 2
};

struct MeasurementHint {
  long long r = 0;
  double calibration_baseline = 0.0;
};

// Biased (population) standard deviation of a pass sequence — the MC-dropout
// model-uncertainty estimator.
double mc_pass_std(std::span<const double> ys);

// Hybrid target/context network with a mixture head.
class DdnModel {
 public:
  DdnModel(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  nn::AdamConfig& optimizer_config() { return adam_.config(); }
  uint64_t seed() const { return seed_; }

  struct HeadNodes {
    nn::Tape::NodeId alphas = -1;
    nn::Tape::NodeId mus = -1;
    nn::Tape::NodeId sigmas = -1;
  };

  // Builds the full graph for a batch. Dropout sites follow the hidden
  // layers and the fusion layer only, never embeddings.
  HeadNodes forward(nn::Tape& tape, const FeatureBatch& batch, nn::DropoutMode mode, Rng& rng,
                    const ForwardTrace* replay = nullptr, ForwardTrace* record = nullptr) const;

  // One optimizer update on a batch; returns the pre-step mean loss.
  double train_step(std::span<const Sample> batch, LossKind kind);

  // Deterministic single-pair mixture output (dropout off).
  GmmParams predict_gmm(const TargetFeatures& t, const ContextFeatures& c) const;

  UncertaintyReport predict_with_uncertainty(const TargetFeatures& t, const ContextFeatures& c,
                                             std::optional<MeasurementHint> hint, int T,
                                             uint64_t mc_seed) const;

  // Batched variant: one deterministic pass plus T stochastic passes for the
  // whole candidate list. hints may be empty or per-row.
  std::vector<UncertaintyReport> predict_batch(const FeatureBatch& batch,
                                               std::span<const std::optional<MeasurementHint>> hints,
                                               int T, uint64_t mc_seed) const;

  // Deterministic means/data stds only (cheap scoring path).
  void predict_means(const FeatureBatch& batch, Vec* means, Vec* data_stds) const;

  // Mean-pooled token embedding of a title; the KDE feature representation.
  Vec title_embedding(const std::vector<int>& token_ids) const;

  void save_checkpoint(const std::filesystem::path& path,
                       const std::vector<double>& calibration_baselines = {}) const;
  static DdnModel load_checkpoint(const std::filesystem::path& path,
                                  const ModelConfig* expected = nullptr);
  static std::string checkpoint_header_json(const std::filesystem::path& path);

  Rng& train_rng() { return train_rng_; }

 private:
  nn::Tape::NodeId subnet_forward(nn::Tape& tape, const std::vector<nn::DenseLayer>& layers,
                                  nn::Tape::NodeId input, nn::DropoutMode mode, Rng& rng,
                                  const ForwardTrace* replay, ForwardTrace* record,
                                  int* site) const;

  ModelConfig cfg_;
  uint64_t seed_;
  nn::ParamStore store_;
  std::vector<nn::EmbeddingTable> target_cat_tables_;
  std::vector<nn::EmbeddingTable> context_cat_tables_;
  nn::EmbeddingTable token_table_;
  std::vector<nn::DenseLayer> target_layers_;
  std::vector<nn::DenseLayer> context_layers_;
  nn::DenseLayer fusion_layer_;
  nn::DenseLayer head_layer_;
  nn::Adam adam_;
  Rng train_rng_;
};

// Epoch-based fit over a sample pool; batches are drawn in a seeded shuffled
// order. Injected samples, when present, are appended as one extra batch per
// epoch (repeated `injection_repeats` times) without disturbing the base
// batch sequence.
struct TrainPlan {
  int epochs = 8;
  int batch_size = 256;
  double lr = 1e-3;
  uint64_t shuffle_seed = 7;
  LossKind kind = LossKind::Ddn;
  int injection_repeats = 1;
};

struct LossCurvePoint {
  int epoch = 0;
  long step = 0;
  double loss = 0.0;
};

void fit_model(DdnModel& model, std::span<const Sample> pool, const TrainPlan& plan,
               std::span<const Sample> injected = {},
               std::vector<LossCurvePoint>* curve = nullptr);

}  // namespace ddn
