#pragma once
// Recurrent cells, dense layers and parameter containers built on the tensor
// ops. Gate math follows the standard LSTM/GRU formulations; everything
// differentiates through the tape like any other composite.

#include <map>
#include <string>
#include <utility>

#include "semnav/ad/random.hpp"
#include "semnav/ad/tensor.hpp"

namespace semnav::ad {

// Named parameter registry. Models register their tensors here so the
// optimizer and checkpoint code can enumerate them.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor t) {
    auto [it, fresh] = params_.emplace(name, std::move(t));
    if (!fresh) throw std::invalid_argument("ParamSet: duplicate name " + name);
    it->second.set_requires_grad(true);
    return it->second;
  }
  Tensor& at(const std::string& name) { return params_.at(name); }
  const std::map<std::string, Tensor>& all() const { return params_; }
  std::map<std::string, Tensor>& all() { return params_; }
  void zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
  }
  void merge(const ParamSet& other, const std::string& prefix) {
    for (const auto& [k, v] : other.all()) add(prefix + k, v);
  }

 private:
  std::map<std::string, Tensor> params_;
};

inline Tensor glorot(Shape shape, Rng& rng) {
  const int64_t fan_in = shape.size() >= 2 ? shape[shape.size() - 2] : shape.back();
  const int64_t fan_out = shape.back();
  const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(static_cast<size_t>(numel(shape)));
  for (double& x : v) x = rng.uniform(-lim, lim);
  return Tensor::from(std::move(shape), std::move(v));
}

// Fully connected layer, weights (in,out), bias (1,out).
struct Dense {
  Tensor w, b;
  Dense() = default;
  Dense(ParamSet& ps, const std::string& name, int64_t in, int64_t out, Rng& rng)
      : w(ps.add(name + ".w", glorot({in, out}, rng))),
        b(ps.add(name + ".b", Tensor::zeros({1, out}))) {}
  Tensor operator()(const Tensor& x) const { return add(matmul(x, w), b); }
};

struct LayerNormParams {
  Tensor gain, bias;
  LayerNormParams() = default;
  LayerNormParams(ParamSet& ps, const std::string& name, int64_t d)
      : gain(ps.add(name + ".gain", Tensor::full({d}, 1.0))),
        bias(ps.add(name + ".bias", Tensor::zeros({d}))) {}
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
};

// ---------------------------------------------------------------------------
// LSTM (gate order i, f, g, o), x (1,in), h/c (1,H), wx (in,4H), wh (H,4H),
// b (1,4H).
// ---------------------------------------------------------------------------
struct LstmState {
  Tensor h, c;
};

struct LstmParams {
  Tensor wx, wh, b;
  int64_t hidden = 0;
  LstmParams() = default;
  LstmParams(ParamSet& ps, const std::string& name, int64_t in, int64_t h, Rng& rng)
      : wx(ps.add(name + ".wx", glorot({in, 4 * h}, rng))),
        wh(ps.add(name + ".wh", glorot({h, 4 * h}, rng))),
        b(ps.add(name + ".b", Tensor::zeros({1, 4 * h}))),
        hidden(h) {}
};

LstmState lstm_cell(const Tensor& x, const LstmState& s, const LstmParams& p);

// Runs the cell over a sequence (T,in); returns the final state.
LstmState lstm_sequence(const Tensor& seq, const LstmParams& p);

// Forward and backward passes concatenated: (1, 2H).
Tensor bilstm_sequence(const Tensor& seq, const LstmParams& fwd, const LstmParams& bwd);

// ---------------------------------------------------------------------------
// GRU, x (1,in), h (1,H), wx (in,3H) gates z|r|n, wh (H,3H), b (1,3H).
// h' = (1-z)*n + z*h
// ---------------------------------------------------------------------------
struct GruParams {
  Tensor wx, wh, b;
  int64_t hidden = 0;
  GruParams() = default;
  GruParams(ParamSet& ps, const std::string& name, int64_t in, int64_t h, Rng& rng)
      : wx(ps.add(name + ".wx", glorot({in, 3 * h}, rng))),
        wh(ps.add(name + ".wh", glorot({h, 3 * h}, rng))),
        b(ps.add(name + ".b", Tensor::zeros({1, 3 * h}))),
        hidden(h) {}
};

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p);

}  // namespace semnav::ad
