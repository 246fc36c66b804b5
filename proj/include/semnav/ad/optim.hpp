#pragma once
// AdamW with decoupled weight decay plus an exponential learning-rate
// schedule stepped on epoch boundaries.

#include <map>
#include <string>
#include <vector>

#include "semnav/ad/nn.hpp"
#include "semnav/ad/tensor.hpp"

namespace semnav::ad {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

class AdamW {
 public:
  AdamW(ParamSet& params, AdamWConfig cfg = {});

  void step();
  void zero_grad();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }

 private:
  ParamSet& params_;
  AdamWConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

// Multiplies the rate by `factor` once every `every` epochs.
class ExpLrSchedule {
 public:
  ExpLrSchedule(double base_lr, double factor = 0.95, int every = 10)
      : base_(base_lr), factor_(factor), every_(every) {}
  double lr_for_epoch(int epoch) const;

 private:
  double base_, factor_;
  int every_;
};

}  // namespace semnav::ad
