#include "ddn/optimizer.hpp"

#include <cmath>

namespace ddn::nn {

void Adam::step(ParamStore& store) {
  const auto& params = store.all();
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size())
    throw UsageError("optimizer state does not match parameter store layout");

  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!p.grad.allFinite())
      throw InternalError("non-finite gradient in parameter '" + p.name + "'");
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    Mat mhat = m_[i] / bc1;
    Mat vhat = v_[i] / bc2;
    p.value.array() -= cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.epsilon);
  }
}

}  // namespace ddn::nn
