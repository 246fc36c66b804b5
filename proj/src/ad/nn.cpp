#include "semnav/ad/nn.hpp"

#include <stdexcept>

namespace semnav::ad {

LstmState lstm_cell(const Tensor& x, const LstmState& s, const LstmParams& p) {
  const int64_t h = p.hidden;
  if (x.rank() != 2 || x.dim(0) != 1)
    throw std::invalid_argument("lstm_cell: x must be (1,in), got " + shape_str(x.shape()));
  if (x.dim(1) != p.wx.dim(0) || s.h.dim(1) != h || s.c.dim(1) != h)
    throw std::invalid_argument("lstm_cell: parameter shapes inconsistent with inputs");
  Tensor z = add(add(matmul(x, p.wx), matmul(s.h, p.wh)), p.b);
  Tensor ig = sigmoid(slice_cols(z, 0, h));
  Tensor fg = sigmoid(slice_cols(z, h, 2 * h));
  Tensor gg = tanh_op(slice_cols(z, 2 * h, 3 * h));
  Tensor og = sigmoid(slice_cols(z, 3 * h, 4 * h));
  Tensor c = add(mul(fg, s.c), mul(ig, gg));
  Tensor hh = mul(og, tanh_op(c));
  return {hh, c};
}

LstmState lstm_sequence(const Tensor& seq, const LstmParams& p) {
  if (seq.rank() != 2 || seq.dim(0) < 1)
    throw std::invalid_argument("lstm_sequence: sequence must be (T>=1, in), got " +
                                shape_str(seq.shape()));
  LstmState s{Tensor::zeros({1, p.hidden}), Tensor::zeros({1, p.hidden})};
  for (int64_t t = 0; t < seq.dim(0); ++t)
    s = lstm_cell(slice_rows(seq, t, t + 1), s, p);
  return s;
}

Tensor bilstm_sequence(const Tensor& seq, const LstmParams& fwd, const LstmParams& bwd) {
  if (seq.rank() != 2 || seq.dim(0) < 1)
    throw std::invalid_argument("bilstm_sequence: sequence must be (T>=1, in)");
  LstmState f{Tensor::zeros({1, fwd.hidden}), Tensor::zeros({1, fwd.hidden})};
  LstmState b{Tensor::zeros({1, bwd.hidden}), Tensor::zeros({1, bwd.hidden})};
  const int64_t t_len = seq.dim(0);
  for (int64_t t = 0; t < t_len; ++t) {
    f = lstm_cell(slice_rows(seq, t, t + 1), f, fwd);
    b = lstm_cell(slice_rows(seq, t_len - 1 - t, t_len - t), b, bwd);
  }
  return concat({f.h, b.h}, 1);
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p) {
  const int64_t hs = p.hidden;
  if (x.rank() != 2 || x.dim(0) != 1)
    throw std::invalid_argument("gru_cell: x must be (1,in), got " + shape_str(x.shape()));
  if (x.dim(1) != p.wx.dim(0) || h.dim(1) != hs)
    throw std::invalid_argument("gru_cell: parameter shapes inconsistent with inputs");
  Tensor xz = matmul(x, p.wx);
  Tensor hz = matmul(h, p.wh);
  Tensor zg = sigmoid(add(add(slice_cols(xz, 0, hs), slice_cols(hz, 0, hs)),
                          slice_cols(p.b, 0, hs)));
  Tensor rg = sigmoid(add(add(slice_cols(xz, hs, 2 * hs), slice_cols(hz, hs, 2 * hs)),
                          slice_cols(p.b, hs, 2 * hs)));
  Tensor ng = tanh_op(add(add(slice_cols(xz, 2 * hs, 3 * hs),
                              mul(rg, slice_cols(hz, 2 * hs, 3 * hs))),
                          slice_cols(p.b, 2 * hs, 3 * hs)));
  // h' = (1-z)*n + z*h
  Tensor one_minus_z = add_scalar(neg(zg), 1.0);
  return add(mul(one_minus_z, ng), mul(zg, h));
}

}  // namespace semnav::ad
