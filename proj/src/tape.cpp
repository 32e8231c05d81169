#include "ddn/tape.hpp"

#include <cmath>

#include "ddn/gmm.hpp"

namespace ddn::nn {

Tape::NodeId Tape::push(Mat v, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(v);
  if (track_) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.back = std::move(back);
  }
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

Tape::NodeId Tape::constant(Mat v) { return push(std::move(v)); }

Tape::NodeId Tape::leaf(Param& p) {
  Param* pp = &p;
  NodeId id = push(p.value);
  if (track_)
    nodes_[id].back = [pp, id](Tape& t) { pp->grad += t.nodes_[id].grad; };
  return id;
}

Tape::NodeId Tape::matmul(NodeId x, NodeId w) {
  check(x);
  check(w);
  const Mat& X = nodes_[x].value;
  const Mat& W = nodes_[w].value;
  if (X.cols() != W.rows())
    throw ConfigError("dense layer dimension mismatch: input width " + std::to_string(X.cols()) +
                      " vs weights " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()));
  Mat out = X * W;
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [x, w, id](Tape& t) {
      t.grad_ref(x) += t.nodes_[id].grad * t.nodes_[w].value.transpose();
      t.grad_ref(w) += t.nodes_[x].value.transpose() * t.nodes_[id].grad;
    };
  return id;
}

Tape::NodeId Tape::add_row_bias(NodeId x, NodeId bias) {
  check(x);
  check(bias);
  const Mat& X = nodes_[x].value;
  const Mat& B = nodes_[bias].value;
  if (B.rows() != 1 || B.cols() != X.cols()) throw ConfigError("bias shape mismatch");
  Mat out = X.rowwise() + B.row(0);
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [x, bias, id](Tape& t) {
      t.grad_ref(x) += t.nodes_[id].grad;
      t.grad_ref(bias).row(0) += t.nodes_[id].grad.colwise().sum();
    };
  return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
      nodes_[a].value.cols() != nodes_[b].value.cols())
    throw ConfigError("add: shape mismatch");
  Mat out = nodes_[a].value + nodes_[b].value;
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [a, b, id](Tape& t) {
      t.grad_ref(a) += t.nodes_[id].grad;
      t.grad_ref(b) += t.nodes_[id].grad;
    };
  return id;
}

Tape::NodeId Tape::cwise_mul(NodeId a, NodeId b) {
  check(a);
  check(b);
  if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
      nodes_[a].value.cols() != nodes_[b].value.cols())
    throw ConfigError("cwise_mul: shape mismatch");
  Mat out = nodes_[a].value.cwiseProduct(nodes_[b].value);
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [a, b, id](Tape& t) {
      t.grad_ref(a) += t.nodes_[id].grad.cwiseProduct(t.nodes_[b].value);
      t.grad_ref(b) += t.nodes_[id].grad.cwiseProduct(t.nodes_[a].value);
    };
  return id;
}

Tape::NodeId Tape::scale(NodeId x, double s) {
  check(x);
  Mat out = nodes_[x].value * s;
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [x, s, id](Tape& t) { t.grad_ref(x) += t.nodes_[id].grad * s; };
  return id;
}

Tape::NodeId Tape::add_scalar(NodeId x, double s) {
  check(x);
  Mat out = nodes_[x].value.array() + s;
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [x, id](Tape& t) { t.grad_ref(x) += t.nodes_[id].grad; };
  return id;
}

Tape::NodeId Tape::relu(NodeId x) {
  check(x);
  Mat out = nodes_[x].value.cwiseMax(0.0);
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [x, id](Tape& t) {
      const Mat& in = t.nodes_[x].value;
      t.grad_ref(x) += t.nodes_[id].grad.cwiseProduct(
          (in.array() > 0.0).cast<double>().matrix());
    };
  return id;
}

Tape::NodeId Tape::softplus(NodeId x) {
  check(x);
  Mat out = nodes_[x].value.unaryExpr([](double v) { return ddn::softplus(v); });
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [x, id](Tape& t) {
      const Mat& in = t.nodes_[x].value;
      t.grad_ref(x) += t.nodes_[id].grad.cwiseProduct(
          in.unaryExpr([](double v) { return ddn::sigmoid(v); }));
    };
  return id;
}

Tape::NodeId Tape::softmax_rows(NodeId x) {
  check(x);
  const Mat& X = nodes_[x].value;
  Mat out(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    double m = X.row(r).maxCoeff();
    Eigen::RowVectorXd e = (X.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [x, id](Tape& t) {
      const Mat& y = t.nodes_[id].value;
      const Mat& g = t.nodes_[id].grad;
      Mat& gx = t.grad_ref(x);
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        double dot = g.row(r).dot(y.row(r));
        gx.row(r) += (g.row(r).array() - dot).matrix().cwiseProduct(y.row(r));
      }
    };
  return id;
}

Tape::NodeId Tape::square(NodeId x) {
  check(x);
  Mat out = nodes_[x].value.array().square();
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [x, id](Tape& t) {
      t.grad_ref(x) += 2.0 * t.nodes_[id].grad.cwiseProduct(t.nodes_[x].value);
    };
  return id;
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& xs) {
  if (xs.empty()) throw UsageError("concat_cols: empty list");
  Eigen::Index rows = nodes_[xs[0]].value.rows();
  Eigen::Index cols = 0;
  for (NodeId x : xs) {
    check(x);
    if (nodes_[x].value.rows() != rows) throw ConfigError("concat_cols: row count mismatch");
    cols += nodes_[x].value.cols();
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (NodeId x : xs) {
    out.middleCols(at, nodes_[x].value.cols()) = nodes_[x].value;
    at += nodes_[x].value.cols();
  }
  NodeId id = push(std::move(out));
  if (track_) {
    std::vector<NodeId> parts = xs;
    nodes_[id].back = [parts, id](Tape& t) {
      Eigen::Index at = 0;
      for (NodeId x : parts) {
        Eigen::Index w = t.nodes_[x].value.cols();
        t.grad_ref(x) += t.nodes_[id].grad.middleCols(at, w);
        at += w;
      }
    };
  }
  return id;
}

Tape::NodeId Tape::slice_cols(NodeId x, Eigen::Index begin, Eigen::Index n) {
  check(x);
  if (begin < 0 || n < 0 || begin + n > nodes_[x].value.cols())
    throw UsageError("slice_cols: range out of bounds");
  Mat out = nodes_[x].value.middleCols(begin, n);
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [x, begin, n, id](Tape& t) {
      t.grad_ref(x).middleCols(begin, n) += t.nodes_[id].grad;
    };
  return id;
}

Tape::NodeId Tape::sub_col_const(NodeId x, const Vec& c) {
  check(x);
  const Mat& X = nodes_[x].value;
  if (X.cols() != 1 || X.rows() != c.size()) throw UsageError("sub_col_const: shape mismatch");
  Mat out = X.col(0) - c;
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [x, id](Tape& t) { t.grad_ref(x) += t.nodes_[id].grad; };
  return id;
}

Tape::NodeId Tape::mean_all(NodeId x) {
  check(x);
  const Mat& X = nodes_[x].value;
  Mat out(1, 1);
  out(0, 0) = X.mean();
  NodeId id = push(std::move(out));
  if (track_) {
    double inv = 1.0 / static_cast<double>(X.size());
    nodes_[id].back = [x, inv, id](Tape& t) {
      t.grad_ref(x).array() += t.nodes_[id].grad(0, 0) * inv;
    };
  }
  return id;
}

Tape::NodeId Tape::gather_rows(NodeId table, const std::vector<int>& ids,
                               const std::string& feature_name) {
  check(table);
  const Mat& T = nodes_[table].value;
  Mat out(static_cast<Eigen::Index>(ids.size()), T.cols());
  for (size_t b = 0; b < ids.size(); ++b) {
    int i = ids[b];
    if (i < 0 || i >= T.rows())
      throw DataError("embedding index " + std::to_string(i) + " out of range [0," +
                      std::to_string(T.rows()) + ") for feature '" + feature_name + "'");
    out.row(static_cast<Eigen::Index>(b)) = T.row(i);
  }
  NodeId id = push(std::move(out));
  if (track_) {
    std::vector<int> idx = ids;
    nodes_[id].back = [table, idx, id](Tape& t) {
      Mat& gt = t.grad_ref(table);
      const Mat& g = t.nodes_[id].grad;
      for (size_t b = 0; b < idx.size(); ++b)
        gt.row(idx[b]) += g.row(static_cast<Eigen::Index>(b));
    };
  }
  return id;
}

Tape::NodeId Tape::mean_pool_rows(NodeId table, const std::vector<std::vector<int>>& id_lists,
                                  const std::string& feature_name) {
  check(table);
  const Mat& T = nodes_[table].value;
  Mat out(static_cast<Eigen::Index>(id_lists.size()), T.cols());
  for (size_t b = 0; b < id_lists.size(); ++b) {
    const auto& ids = id_lists[b];
    if (ids.empty())
      throw DataError("empty id list for feature '" + feature_name + "' at row " +
                      std::to_string(b));
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(T.cols());
    for (int i : ids) {
      if (i < 0 || i >= T.rows())
        throw DataError("embedding index " + std::to_string(i) + " out of range [0," +
                        std::to_string(T.rows()) + ") for feature '" + feature_name + "'");
      acc += T.row(i);
    }
    out.row(static_cast<Eigen::Index>(b)) = acc / static_cast<double>(ids.size());
  }
  NodeId id = push(std::move(out));
  if (track_) {
    std::vector<std::vector<int>> lists = id_lists;
    nodes_[id].back = [table, lists, id](Tape& t) {
      Mat& gt = t.grad_ref(table);
      const Mat& g = t.nodes_[id].grad;
      for (size_t b = 0; b < lists.size(); ++b) {
        double inv = 1.0 / static_cast<double>(lists[b].size());
        for (int i : lists[b]) gt.row(i) += g.row(static_cast<Eigen::Index>(b)) * inv;
      }
    };
  }
  return id;
}

Tape::NodeId Tape::dropout(NodeId x, double rate, DropoutMode mode, Rng& rng,
                           const Mat* replay_mask, Mat* record_mask) {
  check(x);
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
  if (mode == DropoutMode::Off || rate == 0.0) {
    if (record_mask) *record_mask = Mat::Ones(nodes_[x].value.rows(), nodes_[x].value.cols());
    return x;
  }
  const Mat& X = nodes_[x].value;
  Mat mask;
  if (replay_mask) {
    if (replay_mask->rows() != X.rows() || replay_mask->cols() != X.cols())
      throw UsageError("dropout replay mask shape mismatch");
    mask = *replay_mask;
  } else {
    double keep_scale = 1.0 / (1.0 - rate);
    mask = Mat(X.rows(), X.cols());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index r = 0; r < X.rows(); ++r)
      for (Eigen::Index c = 0; c < X.cols(); ++c) mask(r, c) = u(rng) < rate ? 0.0 : keep_scale;
  }
  if (record_mask) *record_mask = mask;
  Mat out = X.cwiseProduct(mask);
  NodeId id = push(std::move(out));
  if (track_) {
    Mat m = mask;
    nodes_[id].back = [x, m, id](Tape& t) {
      t.grad_ref(x) += t.nodes_[id].grad.cwiseProduct(m);
    };
  }
  return id;
}

Tape::NodeId Tape::gmm_nll(NodeId alphas, NodeId mus, NodeId sigmas, const Vec& y,
                           const Vec& sigma_eps) {
  check(alphas);
  check(mus);
  check(sigmas);
  const Mat& A = nodes_[alphas].value;
  const Mat& M = nodes_[mus].value;
  const Mat& S = nodes_[sigmas].value;
  const Eigen::Index B = A.rows(), K = A.cols();
  if (M.rows() != B || M.cols() != K || S.rows() != B || S.cols() != K)
    throw UsageError("gmm_nll: component shape mismatch");
  if (y.size() != B || sigma_eps.size() != B) throw UsageError("gmm_nll: label shape mismatch");
  for (Eigen::Index b = 0; b < B; ++b)
    if (sigma_eps(b) < 0.0)
      throw ConfigError("gmm_nll: negative sigma_eps at row " + std::to_string(b));

  Mat out(B, 1);
  Mat log_comp(B, K);  // log alpha_i + log N(y; mu_i, v_i), kept for backward
  for (Eigen::Index b = 0; b < B; ++b) {
    double e2 = sigma_eps(b) * sigma_eps(b);
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < K; ++k) {
      double v = S(b, k) * S(b, k) + e2;
      double la = A(b, k) > 0.0 ? std::log(A(b, k)) : -std::numeric_limits<double>::infinity();
      double t = la + log_normal_pdf(y(b), M(b, k), v);
      log_comp(b, k) = t;
      m = std::max(m, t);
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) s += std::exp(log_comp(b, k) - m);
    out(b, 0) = -(m + std::log(s));
  }
  NodeId id = push(std::move(out));
  if (track_) {
    Vec yv = y, ev = sigma_eps;
    Mat lc = log_comp;
    nodes_[id].back = [alphas, mus, sigmas, yv, ev, lc, id](Tape& t) {
      const Mat& A = t.nodes_[alphas].value;
      const Mat& M = t.nodes_[mus].value;
      const Mat& S = t.nodes_[sigmas].value;
      const Mat& g = t.nodes_[id].grad;
      Mat& ga = t.grad_ref(alphas);
      Mat& gm = t.grad_ref(mus);
      Mat& gs = t.grad_ref(sigmas);
      const Eigen::Index B = A.rows(), K = A.cols();
      for (Eigen::Index b = 0; b < B; ++b) {
        double e2 = ev(b) * ev(b);
        double lse = -t.nodes_[id].value(b, 0);  // log sum_i exp(lc_i)
        for (Eigen::Index k = 0; k < K; ++k) {
          double v = S(b, k) * S(b, k) + e2;
          double w = std::exp(lc(b, k) - lse);  // posterior responsibility
          double diff = yv(b) - M(b, k);
          // d(-lse)/dalpha = -exp(logN - lse) = -w/alpha
          double dalpha =
              A(b, k) > 0.0 ? -w / A(b, k)
                            : -std::exp(log_normal_pdf(yv(b), M(b, k), v) - lse);
          double dmu = -w * diff / v;
          double dsigma = -w * S(b, k) * (diff * diff - v) / (v * v);
          ga(b, k) += g(b, 0) * dalpha;
          gm(b, k) += g(b, 0) * dmu;
          gs(b, k) += g(b, 0) * dsigma;
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::mixture_mean(NodeId alphas, NodeId mus) {
  check(alphas);
  check(mus);
  const Mat& A = nodes_[alphas].value;
  const Mat& M = nodes_[mus].value;
  if (A.rows() != M.rows() || A.cols() != M.cols()) throw UsageError("mixture_mean: shape mismatch");
  Mat out = A.cwiseProduct(M).rowwise().sum();
  NodeId id = push(std::move(out));
  if (track_)
    nodes_[id].back = [alphas, mus, id](Tape& t) {
      const Mat& g = t.nodes_[id].grad;
      t.grad_ref(alphas) += g.col(0).asDiagonal() * t.nodes_[mus].value;
      t.grad_ref(mus) += g.col(0).asDiagonal() * t.nodes_[alphas].value;
    };
  return id;
}

void Tape::backward(NodeId scalar_node) {
  if (!track_) throw UsageError("backward on a non-tracking tape");
  if (backward_done_) throw UsageError("backward called twice without a new forward pass");
  check(scalar_node);
  if (nodes_[scalar_node].value.size() != 1)
    throw UsageError("backward expects a scalar (1x1) node");
  backward_done_ = true;
  nodes_[scalar_node].grad(0, 0) = 1.0;
  for (NodeId i = static_cast<NodeId>(nodes_.size()) - 1; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

void init_dense_uniform(Param& w, Rng& rng) {
  double fan_in = static_cast<double>(w.value.rows());
  double fan_out = static_cast<double>(w.value.cols());
  double s = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-s, s);
  for (Eigen::Index r = 0; r < w.value.rows(); ++r)
    for (Eigen::Index c = 0; c < w.value.cols(); ++c) w.value(r, c) = u(rng);
}

void init_embedding_normal(Param& table, Rng& rng, double std_dev) {
  std::normal_distribution<double> n(0.0, std_dev);
  for (Eigen::Index r = 0; r < table.value.rows(); ++r)
    for (Eigen::Index c = 0; c < table.value.cols(); ++c) table.value(r, c) = n(rng);
}

DenseLayer::DenseLayer(ParamStore& store, const std::string& name, Eigen::Index in,
                       Eigen::Index out, Activation act, Rng& init_rng)
    : activation(act) {
  if (in <= 0 || out <= 0) throw ConfigError("dense layer dims must be positive: " + name);
  weights = store.create(name + ".W", in, out);
  bias = store.create(name + ".b", 1, out);
  init_dense_uniform(*weights, init_rng);
}

Tape::NodeId DenseLayer::forward(Tape& t, Tape::NodeId input) const {
  Tape::NodeId wx = t.matmul(input, t.leaf(*weights));
  Tape::NodeId z = t.add_row_bias(wx, t.leaf(*bias));
  switch (activation) {
    case Activation::Identity: return z;
    case Activation::Relu: return t.relu(z);
    case Activation::Softmax: return t.softmax_rows(z);
    case Activation::Softplus: return t.softplus(z);
  }
  throw InternalError("unknown activation");
}

EmbeddingTable::EmbeddingTable(ParamStore& store, const std::string& name, Eigen::Index vocab,
                               Eigen::Index dim, Rng& init_rng)
    : feature_name(name) {
  if (vocab <= 0 || dim <= 0) throw ConfigError("embedding dims must be positive: " + name);
  table = store.create(name + ".E", vocab, dim);
  init_embedding_normal(*table, init_rng);
}

Tape::NodeId EmbeddingTable::lookup(Tape& t, const std::vector<int>& ids) const {
  return t.gather_rows(t.leaf(*table), ids, feature_name);
}

Tape::NodeId EmbeddingTable::mean_pool(Tape& t, const std::vector<std::vector<int>>& id_lists) const {
  return t.mean_pool_rows(t.leaf(*table), id_lists, feature_name);
}

}  // namespace ddn::nn
