#pragma once
// Shared test utilities: central finite-difference gradient checking against
// the tape, plus small tensor generators.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "semnav/ad/random.hpp"
#include "semnav/ad/tensor.hpp"

namespace semnav::test {

using ad::Tensor;

inline Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::vector<double> v(static_cast<size_t>(ad::numel(shape)));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0, worst_numeric = 0.0;
  std::string worst_where;
};

// Central finite differences on every element of every input, compared with
// the adjoint from one backward pass. Relative error uses a small absolute
// floor so near-zero gradients do not blow up the ratio.
inline GradCheckResult grad_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
    double h = 1e-6) {
  GradCheckResult res;
  std::vector<std::vector<double>> analytic;
  {
    ad::Tape tape;
    Tensor loss = f(inputs);
    tape.backward(loss);
    for (auto& in : inputs) analytic.push_back(in.grads());
  }
  for (size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].requires_grad()) continue;
    auto& vals = inputs[k].mutable_values();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + h;
      const double fp = f(inputs).item();
      vals[i] = orig - h;
      const double fm = f(inputs).item();
      vals[i] = orig;
      const double num = (fp - fm) / (2.0 * h);
      const double ana = analytic[k][i];
      const double denom = std::max({std::fabs(num), std::fabs(ana), 1e-4});
      const double rel = std::fabs(num - ana) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_analytic = ana;
        res.worst_numeric = num;
        res.worst_where = "input " + std::to_string(k) + " elem " + std::to_string(i);
      }
    }
  }
  return res;
}

}  // namespace semnav::test
