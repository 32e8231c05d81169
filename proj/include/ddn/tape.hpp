#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ddn/common.hpp"

namespace ddn::nn {

// A learnable tensor. `value` and `grad` always share a shape; gradients
// accumulate across backward calls until zeroed.
struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
};

// Ordered registry of parameters. Construction order fixes the checkpoint
// layout and the optimizer slot assignment.
class ParamStore {
 public:
  std::shared_ptr<Param> create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    for (const auto& p : params_)
      if (p->name == name) throw UsageError("duplicate parameter name: " + name);
    auto p = std::make_shared<Param>(name, rows, cols);
    params_.push_back(p);
    return p;
  }

  const std::vector<std::shared_ptr<Param>>& all() const { return params_; }

  std::shared_ptr<Param> find(const std::string& name) const {
    for (const auto& p : params_)
      if (p->name == name) return p;
    return nullptr;
  }

  void zero_grads() {
    for (auto& p : params_) p->grad.setZero();
  }

  Eigen::Index total_size() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
  }

 private:
  std::vector<std::shared_ptr<Param>> params_;
};

enum class DropoutMode { Train, McInference, Off };

// Reverse-mode tape over matrix-valued nodes. Rows index batch entries.
// A tape records one forward pass; backward() may be called once.
class Tape {
 public:
  using NodeId = int;

  explicit Tape(bool track_gradients = true) : track_(track_gradients) {}

  bool tracking() const { return track_; }

  NodeId constant(Mat v);
  // Leaf bound to an external parameter; backward accumulates into p.grad.
  NodeId leaf(Param& p);

  NodeId matmul(NodeId x, NodeId w);
  NodeId add_row_bias(NodeId x, NodeId bias);   // bias is 1 x cols, broadcast over rows
  NodeId add(NodeId a, NodeId b);
  NodeId cwise_mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, double s);
  NodeId add_scalar(NodeId x, double s);
  NodeId relu(NodeId x);
  NodeId softplus(NodeId x);
  NodeId softmax_rows(NodeId x);
  NodeId square(NodeId x);
  NodeId concat_cols(const std::vector<NodeId>& xs);
  NodeId slice_cols(NodeId x, Eigen::Index begin, Eigen::Index n);
  // Subtract a per-row constant from a B x 1 node.
  NodeId sub_col_const(NodeId x, const Vec& c);
  NodeId mean_all(NodeId x);  // 1 x 1

  // Row gather from a V x E table; gradient is sparse (only touched rows).
  NodeId gather_rows(NodeId table, const std::vector<int>& ids, const std::string& feature_name);
  // Mean-pool the table rows listed per batch entry. Lists must be non-empty.
  NodeId mean_pool_rows(NodeId table, const std::vector<std::vector<int>>& id_lists,
                        const std::string& feature_name);

  // Inverted dropout: unit kept with probability 1-rate and scaled by
  // 1/(1-rate). Off mode (or rate 0) is an exact identity. A replay mask
  // takes precedence over the rng; record_mask captures the drawn mask.
  NodeId dropout(NodeId x, double rate, DropoutMode mode, Rng& rng,
                 const Mat* replay_mask = nullptr, Mat* record_mask = nullptr);

  // Per-row negative log likelihood of y under the component mixture with
  // effective variance sigma_i^2 + sigma_eps^2. alphas/mus/sigmas are B x K,
  // y and sigma_eps length B. sigma_eps entries are constants (no gradient).
  NodeId gmm_nll(NodeId alphas, NodeId mus, NodeId sigmas, const Vec& y, const Vec& sigma_eps);

  // Per-row mixture mean sum_i alpha_i mu_i, B x 1, differentiable.
  NodeId mixture_mean(NodeId alphas, NodeId mus);

  const Mat& value(NodeId id) const { return nodes_[id].value; }
  const Mat& grad(NodeId id) const { return nodes_[id].grad; }

  // Seeds the scalar node with gradient 1 and sweeps the tape in reverse.
  // Calling twice on one tape is a usage error.
  void backward(NodeId scalar_node);

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> back;
  };

  NodeId push(Mat v, std::function<void(Tape&)> back = nullptr);
  Mat& grad_ref(NodeId id) { return nodes_[id].grad; }
  void check(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
      throw UsageError("tape: invalid node id");
  }

  std::vector<Node> nodes_;
  bool track_;
  bool backward_done_ = false;
};

// Parameter initializers.
void init_dense_uniform(Param& w, Rng& rng);               // uniform(-s, s), s = sqrt(6/(fan_in+fan_out))
void init_embedding_normal(Param& table, Rng& rng, double std_dev = 0.05);

enum class Activation { Identity, Relu, Softmax, Softplus };

// Fully connected layer: activation(x W + b).
struct DenseLayer {
  std::shared_ptr<Param> weights;  // in x out
  std::shared_ptr<Param> bias;     // 1 x out
  Activation activation = Activation::Identity;

  DenseLayer() = default;
  DenseLayer(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
             Activation act, Rng& init_rng);

  Tape::NodeId forward(Tape& t, Tape::NodeId input) const;
  Eigen::Index in_dim() const { return weights->value.rows(); }
  Eigen::Index out_dim() const { return weights->value.cols(); }
};

struct EmbeddingTable {
  std::shared_ptr<Param> table;  // vocab x dim
  std::string feature_name;

  EmbeddingTable() = default;
  EmbeddingTable(ParamStore& store, const std::string& name, Eigen::Index vocab, Eigen::Index dim,
                 Rng& init_rng);

  Tape::NodeId lookup(Tape& t, const std::vector<int>& ids) const;
  Tape::NodeId mean_pool(Tape& t, const std::vector<std::vector<int>>& id_lists) const;
  Eigen::Index vocab() const { return table->value.rows(); }
  Eigen::Index dim() const { return table->value.cols(); }
};

}  // namespace ddn::nn
