#include "ddn/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace ddn {

using nlohmann::json;
using nn::Tape;

std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::Reg: return "REG";
    case LossKind::Mdn: return "MDN";
    case LossKind::Ddn: return "DDN";
  }
  throw InternalError("unknown loss kind");
}

LossKind loss_kind_from_name(const std::string& s) {
  if (s == "REG") return LossKind::Reg;
  if (s == "MDN") return LossKind::Mdn;
  if (s == "DDN") return LossKind::Ddn;
  throw ConfigError("unknown model kind '" + s + "' (expected REG, MDN or DDN)");
}

void ModelConfig::validate() const {
  if (token_vocab < 1 || token_dim < 1) throw ConfigError("token embedding dims must be positive");
  if (cat_dim < 1) throw ConfigError("categorical embedding dim must be positive");
  for (int v : target_cat_vocabs)
    if (v < 1) throw ConfigError("target categorical vocab must be positive");
  for (int v : context_cat_vocabs)
    if (v < 1) throw ConfigError("context categorical vocab must be positive");
  if (target_real_dim < 0 || context_real_dim < 0) throw ConfigError("real dims must be >= 0");
  if (context_cat_vocabs.empty() && context_real_dim == 0)
    throw ConfigError("context subnet needs at least one feature");
  if (hidden.empty()) throw ConfigError("at least one hidden layer required");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden sizes must be positive");
  if (fusion_dim < 1) throw ConfigError("fusion dim must be positive");
  if (mixture_components < 1) throw ConfigError("mixture needs K >= 1 components");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
  if (mc_passes < 1) throw ConfigError("mc_passes must be >= 1");
  if (sigma_floor <= 0.0) throw ConfigError("sigma floor must be positive");
}

FeatureBatch FeatureBatch::from_samples(std::span<const Sample> samples, const ModelConfig& cfg) {
  if (samples.empty()) throw UsageError("empty batch");
  const size_t n_tcat = cfg.target_cat_vocabs.size();
  const size_t n_ccat = cfg.context_cat_vocabs.size();
  FeatureBatch b;
  const Eigen::Index B = static_cast<Eigen::Index>(samples.size());
  b.token_ids.reserve(samples.size());
  b.target_cats.assign(n_tcat, {});
  b.context_cats.assign(n_ccat, {});
  b.target_reals = Mat::Zero(B, cfg.target_real_dim);
  b.context_reals = Mat::Zero(B, cfg.context_real_dim);
  for (Eigen::Index i = 0; i < B; ++i) {
    const Sample& s = samples[i];
    if (s.target.token_ids.empty()) throw DataError("target has an empty token list");
    if (s.target.categorical_ids.size() != n_tcat)
      throw DataError("target categorical count mismatch");
    if (s.context.context_ids.size() != n_ccat)
      throw DataError("context categorical count mismatch");
    if (s.target.content_reals.size() != cfg.target_real_dim)
      throw DataError("target real feature width mismatch");
    if (s.context.context_reals.size() != cfg.context_real_dim)
      throw DataError("context real feature width mismatch");
    b.token_ids.push_back(s.target.token_ids);
    for (size_t f = 0; f < n_tcat; ++f) b.target_cats[f].push_back(s.target.categorical_ids[f]);
    for (size_t f = 0; f < n_ccat; ++f) b.context_cats[f].push_back(s.context.context_ids[f]);
    if (cfg.target_real_dim > 0) b.target_reals.row(i) = s.target.content_reals.transpose();
    if (cfg.context_real_dim > 0) b.context_reals.row(i) = s.context.context_reals.transpose();
  }
  return b;
}

FeatureBatch FeatureBatch::from_features(std::span<const TargetFeatures> targets,
                                         const ContextFeatures& shared_context,
                                         const ModelConfig& cfg) {
  if (targets.empty()) throw UsageError("empty batch");
  std::vector<Sample> rows(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) {
    rows[i].target = targets[i];
    rows[i].context = shared_context;
  }
  return from_samples(rows, cfg);
}

double mc_pass_std(std::span<const double> ys) {
  if (ys.empty()) return 0.0;
  double s = 0.0, s2 = 0.0;
  for (double y : ys) {
    s += y;
    s2 += y * y;
  }
  double t = static_cast<double>(ys.size());
  double var = s2 / t - (s / t) * (s / t);
  return std::sqrt(std::max(0.0, var));
}

DdnModel::DdnModel(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
  cfg_.validate();
  Rng init_rng = make_rng({seed_, 0xddull});
  token_table_ = nn::EmbeddingTable(store_, "token", cfg_.token_vocab, cfg_.token_dim, init_rng);
  for (size_t f = 0; f < cfg_.target_cat_vocabs.size(); ++f)
    target_cat_tables_.emplace_back(store_, "tcat" + std::to_string(f), cfg_.target_cat_vocabs[f],
                                    cfg_.cat_dim, init_rng);
  for (size_t f = 0; f < cfg_.context_cat_vocabs.size(); ++f)
    context_cat_tables_.emplace_back(store_, "ccat" + std::to_string(f),
                                     cfg_.context_cat_vocabs[f], cfg_.cat_dim, init_rng);

  int t_in = cfg_.token_dim + static_cast<int>(cfg_.target_cat_vocabs.size()) * cfg_.cat_dim +
             cfg_.target_real_dim;
  int c_in = static_cast<int>(cfg_.context_cat_vocabs.size()) * cfg_.cat_dim +
             cfg_.context_real_dim;
  int in = t_in;
  for (size_t l = 0; l < cfg_.hidden.size(); ++l) {
    target_layers_.emplace_back(store_, "target.fc" + std::to_string(l), in, cfg_.hidden[l],
                                nn::Activation::Relu, init_rng);
    in = cfg_.hidden[l];
  }
  in = c_in;
  for (size_t l = 0; l < cfg_.hidden.size(); ++l) {
    context_layers_.emplace_back(store_, "context.fc" + std::to_string(l), in, cfg_.hidden[l],
                                 nn::Activation::Relu, init_rng);
    in = cfg_.hidden[l];
  }
  int d = cfg_.descriptor_dim();
  fusion_layer_ = nn::DenseLayer(store_, "fusion.fc", 3 * d, cfg_.fusion_dim,
                                 nn::Activation::Relu, init_rng);
  head_layer_ = nn::DenseLayer(store_, "head.fc", cfg_.fusion_dim, 3 * cfg_.mixture_components,
                               nn::Activation::Identity, init_rng);
  train_rng_ = make_rng({seed_, 0x7271ull});
}

Tape::NodeId DdnModel::subnet_forward(Tape& tape, const std::vector<nn::DenseLayer>& layers,
                                      Tape::NodeId input, nn::DropoutMode mode, Rng& rng,
                                      const ForwardTrace* replay, ForwardTrace* record,
                                      int* site) const {
  Tape::NodeId x = input;
  for (const auto& layer : layers) {
    x = layer.forward(tape, x);
    const Mat* mask = nullptr;
    if (replay && *site < static_cast<int>(replay->dropout_masks.size()))
      mask = &replay->dropout_masks[*site];
    Mat rec;
    x = tape.dropout(x, cfg_.dropout_rate, mode, rng, mask, record ? &rec : nullptr);
    if (record) {
      record->dropout_masks.push_back(std::move(rec));
      record->activations.push_back(tape.value(x));
    }
    ++(*site);
  }
  return x;
}

DdnModel::HeadNodes DdnModel::forward(Tape& tape, const FeatureBatch& batch, nn::DropoutMode mode,
                                      Rng& rng, const ForwardTrace* replay,
                                      ForwardTrace* record) const {
  const Eigen::Index B = batch.rows();
  if (B == 0) throw UsageError("empty batch");

  std::vector<Tape::NodeId> t_parts;
  t_parts.push_back(token_table_.mean_pool(tape, batch.token_ids));
  for (size_t f = 0; f < target_cat_tables_.size(); ++f)
    t_parts.push_back(target_cat_tables_[f].lookup(tape, batch.target_cats[f]));
  if (cfg_.target_real_dim > 0) t_parts.push_back(tape.constant(batch.target_reals));

  std::vector<Tape::NodeId> c_parts;
  for (size_t f = 0; f < context_cat_tables_.size(); ++f)
    c_parts.push_back(context_cat_tables_[f].lookup(tape, batch.context_cats[f]));
  if (cfg_.context_real_dim > 0) c_parts.push_back(tape.constant(batch.context_reals));

  int site = 0;
  Tape::NodeId t_desc = subnet_forward(tape, target_layers_, tape.concat_cols(t_parts), mode, rng,
                                       replay, record, &site);
  Tape::NodeId c_desc = subnet_forward(tape, context_layers_, tape.concat_cols(c_parts), mode, rng,
                                       replay, record, &site);

  // Collaborative fusion: concatenation plus the elementwise interaction.
  Tape::NodeId interaction = tape.cwise_mul(t_desc, c_desc);
  Tape::NodeId fused = tape.concat_cols({t_desc, c_desc, interaction});
  Tape::NodeId f = fusion_layer_.forward(tape, fused);
  {
    const Mat* mask = nullptr;
    if (replay && site < static_cast<int>(replay->dropout_masks.size()))
      mask = &replay->dropout_masks[site];
    Mat rec;
    f = tape.dropout(f, cfg_.dropout_rate, mode, rng, mask, record ? &rec : nullptr);
    if (record) {
      record->dropout_masks.push_back(std::move(rec));
      record->activations.push_back(tape.value(f));
    }
    ++site;
  }

  Tape::NodeId raw = head_layer_.forward(tape, f);
  int K = cfg_.mixture_components;
  HeadNodes head;
  head.alphas = tape.softmax_rows(tape.slice_cols(raw, 0, K));
  head.mus = tape.slice_cols(raw, K, K);
  head.sigmas = tape.add_scalar(tape.softplus(tape.slice_cols(raw, 2 * K, K)), cfg_.sigma_floor);
  return head;
}

namespace {

GmmParams gmm_from_row(const Mat& alphas, const Mat& mus, const Mat& sigmas, Eigen::Index row) {
  GmmParams g;
  g.alphas = alphas.row(row).transpose();
  g.mus = mus.row(row).transpose();
  g.sigmas = sigmas.row(row).transpose();
  return g;
}

}  // namespace

double DdnModel::train_step(std::span<const Sample> batch, LossKind kind) {
  if (batch.empty()) throw UsageError("train_step: empty batch");
  FeatureBatch fb = FeatureBatch::from_samples(batch, cfg_);
  const Eigen::Index B = fb.rows();

  Tape tape(true);
  HeadNodes head = forward(tape, fb, nn::DropoutMode::Train, train_rng_);

  Vec y(B);
  for (Eigen::Index i = 0; i < B; ++i) y(i) = batch[i].y;

  Tape::NodeId per_sample;
  switch (kind) {
    case LossKind::Reg: {
      Tape::NodeId mean = tape.mixture_mean(head.alphas, head.mus);
      per_sample = tape.square(tape.sub_col_const(mean, y));
      break;
    }
    case LossKind::Mdn: {
      per_sample = tape.gmm_nll(head.alphas, head.mus, head.sigmas, y, Vec::Zero(B));
      break;
    }
    case LossKind::Ddn: {
      Vec eps(B);
      const Mat& a = tape.value(head.alphas);
      const Mat& m = tape.value(head.mus);
      for (Eigen::Index i = 0; i < B; ++i) {
        const Sample& s = batch[i];
        if (s.r < 1) throw DataError("DDN training needs r >= 1 on every sample");
        // Stop-gradient predictive mean from this very pass (or the
        // empirical label, per config) feeds the exogenous noise scale.
        double mu = cfg_.noise_mu_source == NoiseMuSource::Model
                        ? a.row(i).dot(m.row(i))
                        : s.y;
        eps(i) = sigma_eps(mu, s.r, s.calibration_baseline);
      }
      per_sample = tape.gmm_nll(head.alphas, head.mus, head.sigmas, y, eps);
      break;
    }
    default:
      throw InternalError("unknown loss kind");
  }

  const Mat& losses = tape.value(per_sample);
  for (Eigen::Index i = 0; i < B; ++i)
    if (!std::isfinite(losses(i, 0)))
      throw InternalError("non-finite loss at sample index " + std::to_string(i) +
                          " (target_id " + std::to_string(batch[i].target_id) + ")");

  Tape::NodeId loss = tape.mean_all(per_sample);
  double loss_value = tape.value(loss)(0, 0);
  store_.zero_grads();
  tape.backward(loss);
  adam_.step(store_);
  return loss_value;
}

GmmParams DdnModel::predict_gmm(const TargetFeatures& t, const ContextFeatures& c) const {
  FeatureBatch fb = FeatureBatch::from_features(std::span<const TargetFeatures>(&t, 1), c, cfg_);
  Tape tape(false);
  Rng rng(0);
  HeadNodes head = forward(tape, fb, nn::DropoutMode::Off, rng);
  return gmm_from_row(tape.value(head.alphas), tape.value(head.mus), tape.value(head.sigmas), 0);
}

std::vector<UncertaintyReport> DdnModel::predict_batch(
    const FeatureBatch& batch, std::span<const std::optional<MeasurementHint>> hints, int T,
    uint64_t mc_seed) const {
  if (T < 1) throw ConfigError("predict needs T >= 1 stochastic passes (T=0 given)");
  if (!hints.empty() && static_cast<Eigen::Index>(hints.size()) != batch.rows())
    throw UsageError("hint count does not match batch rows");
  const Eigen::Index B = batch.rows();

  std::vector<UncertaintyReport> out(B);
  {
    Tape tape(false);
    Rng rng(0);
    HeadNodes head = forward(tape, batch, nn::DropoutMode::Off, rng);
    const Mat& a = tape.value(head.alphas);
    const Mat& m = tape.value(head.mus);
    const Mat& s = tape.value(head.sigmas);
    for (Eigen::Index i = 0; i < B; ++i) {
      out[i].gmm = gmm_from_row(a, m, s, i);
      out[i].mean = mixture_mean(out[i].gmm);
      out[i].data_std = mixture_std(out[i].gmm);
    }
  }

  Vec sum = Vec::Zero(B), sumsq = Vec::Zero(B);
  for (int pass = 0; pass < T; ++pass) {
    Tape tape(false);
    Rng rng = make_rng({mc_seed, static_cast<uint64_t>(pass)});
    HeadNodes head = forward(tape, batch, nn::DropoutMode::McInference, rng);
    const Mat& a = tape.value(head.alphas);
    const Mat& m = tape.value(head.mus);
    for (Eigen::Index i = 0; i < B; ++i) {
      double yhat = a.row(i).dot(m.row(i));
      sum(i) += yhat;
      sumsq(i) += yhat * yhat;
    }
  }
  double t = static_cast<double>(T);
  for (Eigen::Index i = 0; i < B; ++i) {
    if (T >= 2) {
      double var = sumsq(i) / t - (sum(i) / t) * (sum(i) / t);
      out[i].model_std = std::sqrt(std::max(0.0, var));
      out[i].model_std_valid = true;
    } else {
      out[i].model_std = 0.0;
      out[i].model_std_valid = false;
    }
    if (!hints.empty() && hints[i].has_value())
      out[i].measurement_std = sigma_eps(out[i].mean, hints[i]->r, hints[i]->calibration_baseline);
  }
  return out;
}

UncertaintyReport DdnModel::predict_with_uncertainty(const TargetFeatures& t,
                                                     const ContextFeatures& c,
                                                     std::optional<MeasurementHint> hint, int T,
                                                     uint64_t mc_seed) const {
  FeatureBatch fb = FeatureBatch::from_features(std::span<const TargetFeatures>(&t, 1), c, cfg_);
  std::vector<std::optional<MeasurementHint>> hints{hint};
  return predict_batch(fb, hints, T, mc_seed)[0];
}

void DdnModel::predict_means(const FeatureBatch& batch, Vec* means, Vec* data_stds) const {
  Tape tape(false);
  Rng rng(0);
  HeadNodes head = forward(tape, batch, nn::DropoutMode::Off, rng);
  const Mat& a = tape.value(head.alphas);
  const Mat& m = tape.value(head.mus);
  const Mat& s = tape.value(head.sigmas);
  const Eigen::Index B = batch.rows();
  if (means) means->resize(B);
  if (data_stds) data_stds->resize(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    GmmParams g = gmm_from_row(a, m, s, i);
    if (means) (*means)(i) = mixture_mean(g);
    if (data_stds) (*data_stds)(i) = mixture_std(g);
  }
}

Vec DdnModel::title_embedding(const std::vector<int>& token_ids) const {
  if (token_ids.empty()) throw DataError("title embedding of an empty token list");
  const Mat& table = token_table_.table->value;
  Vec acc = Vec::Zero(table.cols());
  for (int id : token_ids) {
    if (id < 0 || id >= table.rows())
      throw DataError("token id " + std::to_string(id) + " out of vocabulary");
    acc += table.row(id).transpose();
  }
  return acc / static_cast<double>(token_ids.size());
}

// ---------------------------------------------------------------------------
// Checkpoint format (version 1), little-endian:
//   bytes 0..7   magic "DDNCKPT1"
//   u64          header length H
//   H bytes      JSON header: format_version, seed, config, param shapes,
//                calibration baselines
//   u64          payload double count
//   payload      all parameter values, store order, row-major, f64 LE
// ---------------------------------------------------------------------------

namespace {

void to_json_config(json& j, const ModelConfig& c) {
  j = json{{"token_vocab", c.token_vocab},
           {"token_dim", c.token_dim},
           {"cat_dim", c.cat_dim},
           {"target_cat_vocabs", c.target_cat_vocabs},
           {"context_cat_vocabs", c.context_cat_vocabs},
           {"target_real_dim", c.target_real_dim},
           {"context_real_dim", c.context_real_dim},
           {"hidden", c.hidden},
           {"fusion_dim", c.fusion_dim},
           {"mixture_components", c.mixture_components},
           {"dropout_rate", c.dropout_rate},
           {"mc_passes", c.mc_passes},
           {"sigma_floor", c.sigma_floor},
           {"noise_mu_source",
            c.noise_mu_source == NoiseMuSource::Model ? "model" : "empirical"}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.token_vocab = j.at("token_vocab").get<int>();
  c.token_dim = j.at("token_dim").get<int>();
  c.cat_dim = j.at("cat_dim").get<int>();
  c.target_cat_vocabs = j.at("target_cat_vocabs").get<std::vector<int>>();
  c.context_cat_vocabs = j.at("context_cat_vocabs").get<std::vector<int>>();
  c.target_real_dim = j.at("target_real_dim").get<int>();
  c.context_real_dim = j.at("context_real_dim").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.fusion_dim = j.at("fusion_dim").get<int>();
  c.mixture_components = j.at("mixture_components").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.mc_passes = j.at("mc_passes").get<int>();
  c.sigma_floor = j.at("sigma_floor").get<double>();
  c.noise_mu_source = j.at("noise_mu_source").get<std::string>() == "empirical"
                          ? NoiseMuSource::Empirical
                          : NoiseMuSource::Model;
  return c;
}

constexpr char kCkptMagic[8] = {'D', 'D', 'N', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ofstream& f, uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t read_u64(std::ifstream& f) {
  uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void DdnModel::save_checkpoint(const std::filesystem::path& path,
                               const std::vector<double>& calibration_baselines) const {
  json header;
  header["format_version"] = 1;
  header["seed"] = seed_;
  to_json_config(header["config"], cfg_);
  header["calibration_baselines"] = calibration_baselines;
  json shapes = json::array();
  uint64_t total = 0;
  for (const auto& p : store_.all()) {
    shapes.push_back(json{{"name", p->name},
                          {"rows", p->value.rows()},
                          {"cols", p->value.cols()}});
    total += static_cast<uint64_t>(p->size());
  }
  header["params"] = shapes;
  std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint file " + path.string());
  f.write(kCkptMagic, 8);
  write_u64(f, hs.size());
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  write_u64(f, total);
  for (const auto& p : store_.all())
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        double v = p->value(r, c);
        f.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  if (!f) throw DataError("checkpoint write failed for " + path.string());
}

std::string DdnModel::checkpoint_header_json(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw DataError("not a checkpoint file (bad magic): " + path.string());
  uint64_t hlen = read_u64(f);
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw DataError("truncated checkpoint header: " + path.string());
  return hs;
}

DdnModel DdnModel::load_checkpoint(const std::filesystem::path& path,
                                   const ModelConfig* expected) {
  std::string hs = checkpoint_header_json(path);
  json header = json::parse(hs);
  if (header.at("format_version").get<int>() != 1)
    throw DataError("unsupported checkpoint format version");
  ModelConfig cfg = config_from_json(header.at("config"));
  if (expected && !(*expected == cfg))
    throw ConfigError("checkpoint architecture does not match the requested configuration");
  DdnModel model(cfg, header.at("seed").get<uint64_t>());

  std::ifstream f(path, std::ios::binary);
  f.seekg(static_cast<std::streamoff>(8 + sizeof(uint64_t) + hs.size()));
  uint64_t total = read_u64(f);
  if (total != static_cast<uint64_t>(model.store_.total_size()))
    throw DataError("checkpoint payload size mismatch");
  const auto& shapes = header.at("params");
  const auto& params = model.store_.all();
  if (shapes.size() != params.size()) throw DataError("checkpoint parameter list mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    nn::Param& p = *params[i];
    const auto& sh = shapes[static_cast<int>(i)];
    if (sh.at("name").get<std::string>() != p.name ||
        sh.at("rows").get<Eigen::Index>() != p.value.rows() ||
        sh.at("cols").get<Eigen::Index>() != p.value.cols())
      throw DataError("checkpoint parameter shape mismatch at '" + p.name + "'");
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        double v = 0.0;
        f.read(reinterpret_cast<char*>(&v), sizeof(v));
        p.value(r, c) = v;
      }
  }
  if (!f) throw DataError("truncated checkpoint payload: " + path.string());
  return model;
}

void fit_model(DdnModel& model, std::span<const Sample> pool, const TrainPlan& plan,
               std::span<const Sample> injected, std::vector<LossCurvePoint>* curve) {
  if (plan.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (plan.batch_size < 1) throw ConfigError("batch size must be >= 1");
  model.optimizer_config().lr = plan.lr;
  std::vector<size_t> order(pool.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng = make_rng({plan.shuffle_seed, 0x5f17ull});
  long step = 0;
  std::vector<Sample> scratch;
  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(plan.batch_size)) {
      size_t end = std::min(order.size(), at + static_cast<size_t>(plan.batch_size));
      scratch.clear();
      for (size_t i = at; i < end; ++i) scratch.push_back(pool[order[i]]);
      double loss = model.train_step(scratch, plan.kind);
      ++step;
      if (curve) curve->push_back({epoch, step, loss});
    }
    if (!injected.empty()) {
      scratch.assign(injected.begin(), injected.end());
      for (int rep = 0; rep < plan.injection_repeats; ++rep) {
        double loss = model.train_step(scratch, plan.kind);
        ++step;
        if (curve) curve->push_back({epoch, step, loss});
      }
    }
  }
}

}  // namespace ddn
