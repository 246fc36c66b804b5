#include "semnav/ad/optim.hpp"

#include <cmath>

namespace semnav::ad {

AdamW::AdamW(ParamSet& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
  for (auto& [name, t] : params_.all()) {
    m_[name].assign(static_cast<size_t>(t.size()), 0.0);
    v_[name].assign(static_cast<size_t>(t.size()), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, t] : params_.all()) {
    auto& m = m_[name];
    auto& v = v_[name];
    auto& val = t.mutable_values();
    const auto& g = t.grads();
    for (size_t i = 0; i < val.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      // decoupled decay: applied to the parameter, not the gradient
      val[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * val[i]);
    }
  }
}

void AdamW::zero_grad() { params_.zero_grad(); }

double ExpLrSchedule::lr_for_epoch(int epoch) const {
  return base_ * std::pow(factor_, static_cast<double>(epoch / every_));
}

}  // namespace semnav::ad
