#include "semnav/ad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace semnav::ad {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

thread_local Tape* g_active_tape = nullptr;

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

std::shared_ptr<TensorImpl> make_impl(Shape shape) {
  auto impl = std::make_shared<TensorImpl>();
  impl->value.assign(static_cast<size_t>(numel(shape)), 0.0);
  impl->shape = std::move(shape);
  return impl;
}

// Registers `out` as a tracked op result when any input is tracked and a tape
// is active. `fn` is the adjoint closure; it may capture raw pointers to the
// parent impls (kept alive through out->parents).
Tensor finish(std::shared_ptr<TensorImpl> out,
              std::initializer_list<const Tensor*> inputs,
              std::function<void()> fn) {
  if (should_record(inputs)) {
    out->requires_grad = true;
    for (const Tensor* t : inputs)
      if (t->defined()) out->parents.push_back(t->impl());
    out->backprop = std::move(fn);
    g_active_tape->record(out);
  }
  return Tensor(std::move(out));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Right-aligned broadcast plan: per output dim, the input stride (0 where the
// input extent is 1).
struct BcastPlan {
  Shape out;
  std::vector<int64_t> sa, sb;
};

BcastPlan broadcast_plan(const Shape& a, const Shape& b, const char* op) {
  const int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
  const int r = std::max(ra, rb);
  BcastPlan p;
  p.out.assign(r, 1);
  for (int i = 0; i < r; ++i) {
    const int64_t da = i < ra ? a[ra - 1 - i] : 1;
    const int64_t db = i < rb ? b[rb - 1 - i] : 1;
    if (da != db && da != 1 && db != 1)
      throw std::invalid_argument(std::string(op) + ": shapes not broadcast-compatible " +
                                  shape_str(a) + " vs " + shape_str(b));
    p.out[r - 1 - i] = std::max(da, db);
  }
  auto strides_for = [&](const Shape& s) {
    std::vector<int64_t> strides(r, 0);
    int64_t acc = 1;
    const int rs = static_cast<int>(s.size());
    for (int i = 0; i < rs; ++i) {
      const int64_t extent = s[rs - 1 - i];
      strides[r - 1 - i] = (extent == 1) ? 0 : acc;
      acc *= extent;
    }
    return strides;
  };
  p.sa = strides_for(a);
  p.sb = strides_for(b);
  return p;
}

// Calls fn(iout, ia, ib) for every element of the broadcast output.
template <typename Fn>
void for_each_bcast(const BcastPlan& p, Fn&& fn) {
  const int r = static_cast<int>(p.out.size());
  const int64_t n = numel(p.out);
  std::vector<int64_t> idx(r, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t i = 0; i < n; ++i) {
    fn(i, ia, ib);
    for (int d = r - 1; d >= 0; --d) {
      idx[d]++;
      ia += p.sa[d];
      ib += p.sb[d];
      if (idx[d] < p.out[d]) break;
      ia -= p.sa[d] * p.out[d];
      ib -= p.sb[d] * p.out[d];
      idx[d] = 0;
    }
  }
}

Tensor binary_op(const Tensor& a, const Tensor& b, const char* name,
                 double (*fwd)(double, double),
                 void (*bwd)(double, double, double, double&, double&)) {
  BcastPlan p = broadcast_plan(a.shape(), b.shape(), name);
  auto out = make_impl(p.out);
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out->value;
  for_each_bcast(p, [&](int64_t i, int64_t ia, int64_t ib) {
    ov[static_cast<size_t>(i)] =
        fwd(av[static_cast<size_t>(ia)], bv[static_cast<size_t>(ib)]);
  });
  TensorImpl* self = out.get();
  auto ai = a.impl(), bi = b.impl();
  return finish(out, {&a, &b}, [self, ai, bi, p, bwd]() {
    const bool ga = ai->requires_grad, gb = bi->requires_grad;
    if (ga) ai->ensure_grad();
    if (gb) bi->ensure_grad();
    for_each_bcast(p, [&](int64_t i, int64_t ia, int64_t ib) {
      const double go = self->grad[static_cast<size_t>(i)];
      double da = 0, db = 0;
      bwd(ai->value[static_cast<size_t>(ia)], bi->value[static_cast<size_t>(ib)], go, da, db);
      if (ga) ai->grad[static_cast<size_t>(ia)] += da;
      if (gb) bi->grad[static_cast<size_t>(ib)] += db;
    });
  });
}

Tensor unary_op(const Tensor& a, const char* name, double (*fwd)(double),
                double (*dydx)(double x, double y)) {
  auto out = make_impl(a.shape());
  const auto& av = a.values();
  for (size_t i = 0; i < av.size(); ++i) out->value[i] = fwd(av[i]);
  TensorImpl* self = out.get();
  auto ai = a.impl();
  (void)name;
  return finish(out, {&a}, [self, ai, dydx]() {
    ai->ensure_grad();
    for (size_t i = 0; i < ai->value.size(); ++i)
      ai->grad[i] += self->grad[i] * dydx(ai->value[i], self->value[i]);
  });
}

}  // namespace

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

void TensorImpl::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

void TensorImpl::zero_grad() { grad.assign(value.size(), 0.0); }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto impl = make_impl(std::move(shape));
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  auto impl = make_impl(std::move(shape));
  std::fill(impl->value.begin(), impl->value.end(), fill);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return full({1}, v, requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (numel(shape) != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("Tensor::from: " + shape_str(shape) + " holds " +
                                std::to_string(numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

const std::vector<double>& Tensor::grads() const {
  impl_->ensure_grad();
  return impl_->grad;
}

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("item(): tensor has " + std::to_string(size()) + " elements");
  return impl_->value[0];
}

double Tensor::at(int64_t r, int64_t c) const {
  return impl_->value[static_cast<size_t>(r * shape()[1] + c)];
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::Tape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::current() { return g_active_tape; }

NoGrad::NoGrad() : saved(g_active_tape) { g_active_tape = nullptr; }
NoGrad::~NoGrad() { g_active_tape = saved; }

void Tape::record(std::shared_ptr<TensorImpl> node) {
  if (consumed_)
    throw std::logic_error("Tape: recording after backward(); reset() first");
  nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& root) {
  if (consumed_)
    throw std::logic_error("Tape: backward() called twice without a new forward pass");
  if (root.size() != 1)
    throw std::invalid_argument("Tape::backward: root must be scalar, got " +
                                shape_str(root.shape()));
  consumed_ = true;
  TensorImpl* rootp = root.impl().get();
  rootp->ensure_grad();
  rootp->grad[0] = 1.0;
  bool seen_root = false;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    TensorImpl* n = it->get();
    if (!seen_root) {
      if (n == rootp) seen_root = true;
      else continue;  // nodes recorded after the root cannot influence it
    }
    n->ensure_grad();
    if (n->backprop) n->backprop();
  }
  if (!seen_root && rootp->backprop)
    throw std::logic_error("Tape::backward: root was not recorded on this tape");
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "add", [](double x, double y) { return x + y; },
                   [](double, double, double g, double& da, double& db) {
                     da = g;
                     db = g;
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "sub", [](double x, double y) { return x - y; },
                   [](double, double, double g, double& da, double& db) {
                     da = g;
                     db = -g;
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "mul", [](double x, double y) { return x * y; },
                   [](double x, double y, double g, double& da, double& db) {
                     da = g * y;
                     db = g * x;
                   });
}

Tensor add_scalar(const Tensor& a, double s) {
  auto out = make_impl(a.shape());
  for (size_t i = 0; i < a.values().size(); ++i) out->value[i] = a.values()[i] + s;
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai]() {
    ai->ensure_grad();
    for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += self->grad[i];
  });
}

Tensor mul_scalar(const Tensor& a, double s) {
  auto out = make_impl(a.shape());
  for (size_t i = 0; i < a.values().size(); ++i) out->value[i] = a.values()[i] * s;
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai, s]() {
    ai->ensure_grad();
    for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += self->grad[i] * s;
  });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor tanh_op(const Tensor& a) {
  return unary_op(a, "tanh", [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor clamp_op(const Tensor& a, double lo, double hi) {
  auto out = make_impl(a.shape());
  for (size_t i = 0; i < a.values().size(); ++i)
    out->value[i] = std::clamp(a.values()[i], lo, hi);
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai, lo, hi]() {
    ai->ensure_grad();
    for (size_t i = 0; i < ai->value.size(); ++i)
      if (ai->value[i] >= lo && ai->value[i] <= hi) ai->grad[i] += self->grad[i];
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, "sigmoid",
                  [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary_op(a, "relu", [](double x) { return x > 0 ? x : 0.0; },
                  [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor exp_op(const Tensor& a) {
  for (double v : a.values())
    if (v > 700.0)
      throw std::domain_error("exp: input " + std::to_string(v) +
                              " would overflow to non-finite");
  return unary_op(a, "exp", [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log_op(const Tensor& a) {
  for (double v : a.values())
    if (!(v > 0.0))
      throw std::domain_error("log: non-positive input " + std::to_string(v));
  return unary_op(a, "log", [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
  // log(1+e^x), stable form x + log1p(e^-x) for x > 0
  return unary_op(a, "softplus",
                  [](double x) {
                    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
                  },
                  [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor square(const Tensor& a) {
  return unary_op(a, "square", [](double x) { return x * x; },
                  [](double x, double) { return 2.0 * x; });
}

// ---------------------------------------------------------------------------
// Linear algebra & shape
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("matmul: expects rank-2 operands, got " +
                                shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                shape_str(a.shape()) + " x " + shape_str(b.shape()));
  auto out = make_impl({m, n});
  const double* A = a.values().data();
  const double* B = b.values().data();
  double* O = out->value.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * n;
      double* orow = O + i * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  TensorImpl* self = out.get();
  auto ai = a.impl(), bi = b.impl();
  return finish(out, {&a, &b}, [self, ai, bi, m, k, n]() {
    const double* G = self->grad.data();
    if (ai->requires_grad) {
      ai->ensure_grad();
      double* dA = ai->grad.data();
      const double* B = bi->value.data();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          if (g == 0.0) continue;
          for (int64_t p = 0; p < k; ++p) dA[i * k + p] += g * B[p * n + j];
        }
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      double* dB = bi->grad.data();
      const double* A = ai->value.data();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          const double* grow = G + i * n;
          double* brow = dB + p * n;
          for (int64_t j = 0; j < n; ++j) brow[j] += av * grow[j];
        }
    }
  });
}

Tensor reshape(const Tensor& a, Shape new_shape) {
  if (numel(new_shape) != a.size())
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) +
                                " as " + shape_str(new_shape));
  auto out = make_impl(std::move(new_shape));
  out->value = a.values();
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai]() {
    ai->ensure_grad();
    for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += self->grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  const int rank = parts[0].rank();
  if (rank == 1) {
    if (axis != 0) throw std::invalid_argument("concat: axis out of range for rank 1");
    int64_t total = 0;
    for (const auto& p : parts) total += p.size();
    auto out = make_impl({total});
    int64_t off = 0;
    for (const auto& p : parts) {
      std::copy(p.values().begin(), p.values().end(), out->value.begin() + off);
      off += p.size();
    }
    TensorImpl* self = out.get();
    std::vector<std::shared_ptr<TensorImpl>> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    std::vector<const Tensor*> refs;
    bool track = false;
    for (const auto& p : parts) track |= p.requires_grad();
    if (Tape::current() && track) {
      self->requires_grad = true;
      self->parents = impls;
      self->backprop = [self, impls]() {
        int64_t off2 = 0;
        for (auto& im : impls) {
          if (im->requires_grad) {
            im->ensure_grad();
            for (size_t i = 0; i < im->value.size(); ++i)
              im->grad[i] += self->grad[static_cast<size_t>(off2) + i];
          }
          off2 += static_cast<int64_t>(im->value.size());
        }
      };
      Tape::current()->record(out);
    }
    return Tensor(out);
  }
  if (rank != 2 || (axis != 0 && axis != 1))
    throw std::invalid_argument("concat: supports rank-1 axis 0 and rank-2 axes 0/1");
  // rank 2
  const int64_t fixed = axis == 0 ? parts[0].dim(1) : parts[0].dim(0);
  int64_t var = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || (axis == 0 ? p.dim(1) : p.dim(0)) != fixed)
      throw std::invalid_argument("concat: incompatible part shape " + shape_str(p.shape()));
    var += axis == 0 ? p.dim(0) : p.dim(1);
  }
  Shape oshape = axis == 0 ? Shape{var, fixed} : Shape{fixed, var};
  auto out = make_impl(oshape);
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const int64_t rows = p.dim(0), cols = p.dim(1);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) {
        const int64_t orow = axis == 0 ? off + r : r;
        const int64_t ocol = axis == 0 ? c : off + c;
        out->value[static_cast<size_t>(orow * oshape[1] + ocol)] = p.at(r, c);
      }
    off += axis == 0 ? rows : cols;
  }
  bool track = false;
  for (const auto& p : parts) track |= p.requires_grad();
  if (Tape::current() && track) {
    TensorImpl* self = out.get();
    std::vector<std::shared_ptr<TensorImpl>> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    self->requires_grad = true;
    self->parents = impls;
    const int64_t ocols = oshape[1];
    self->backprop = [self, impls, offsets, axis, ocols]() {
      for (size_t pi = 0; pi < impls.size(); ++pi) {
        auto& im = impls[pi];
        if (!im->requires_grad) continue;
        im->ensure_grad();
        const int64_t rows = im->shape[0], cols = im->shape[1], o = offsets[pi];
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) {
            const int64_t orow = axis == 0 ? o + r : r;
            const int64_t ocol = axis == 0 ? c : o + c;
            im->grad[static_cast<size_t>(r * cols + c)] +=
                self->grad[static_cast<size_t>(orow * ocols + ocol)];
          }
      }
    };
    Tape::current()->record(out);
  }
  return Tensor(out);
}

Tensor slice_cols(const Tensor& a, int64_t from, int64_t to) {
  if (a.rank() != 2 || from < 0 || to > a.dim(1) || from >= to)
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(from) + "," +
                                std::to_string(to) + ") for " + shape_str(a.shape()));
  const int64_t rows = a.dim(0), cols = a.dim(1), w = to - from;
  auto out = make_impl({rows, w});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < w; ++c)
      out->value[static_cast<size_t>(r * w + c)] = a.at(r, from + c);
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai, rows, cols, w, from]() {
    ai->ensure_grad();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < w; ++c)
        ai->grad[static_cast<size_t>(r * cols + from + c)] +=
            self->grad[static_cast<size_t>(r * w + c)];
  });
}

Tensor slice_rows(const Tensor& a, int64_t from, int64_t to) {
  if (a.rank() != 2 || from < 0 || to > a.dim(0) || from >= to)
    throw std::invalid_argument("slice_rows: bad range [" + std::to_string(from) + "," +
                                std::to_string(to) + ") for " + shape_str(a.shape()));
  const int64_t cols = a.dim(1), h = to - from;
  auto out = make_impl({h, cols});
  std::copy(a.values().begin() + from * cols, a.values().begin() + to * cols,
            out->value.begin());
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai, cols, h, from]() {
    ai->ensure_grad();
    for (int64_t i = 0; i < h * cols; ++i)
      ai->grad[static_cast<size_t>(from * cols + i)] += self->grad[static_cast<size_t>(i)];
  });
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("transpose2d: expects rank 2");
  const int64_t r = a.dim(0), c = a.dim(1);
  auto out = make_impl({c, r});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j)
      out->value[static_cast<size_t>(j * r + i)] = a.at(i, j);
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai, r, c]() {
    ai->ensure_grad();
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j)
        ai->grad[static_cast<size_t>(i * c + j)] += self->grad[static_cast<size_t>(j * r + i)];
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  auto out = make_impl({1});
  out->value[0] = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai]() {
    ai->ensure_grad();
    const double g = self->grad[0];
    for (double& d : ai->grad) d += g;
  });
}

Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  return mul_scalar(sum(a), inv);
}

namespace {
// Axis reduction geometry: treat tensor as (outer, extent, inner).
struct AxisGeom {
  int64_t outer = 1, extent = 1, inner = 1;
};
AxisGeom axis_geom(const Shape& s, int axis, const char* op) {
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) +
                                " out of range for " + shape_str(s));
  AxisGeom g;
  for (int i = 0; i < axis; ++i) g.outer *= s[static_cast<size_t>(i)];
  g.extent = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) g.inner *= s[i];
  return g;
}
}  // namespace

Tensor sum_axis(const Tensor& a, int axis) {
  AxisGeom g = axis_geom(a.shape(), axis, "sum_axis");
  Shape oshape = a.shape();
  oshape[static_cast<size_t>(axis)] = 1;
  auto out = make_impl(oshape);
  for (int64_t o = 0; o < g.outer; ++o)
    for (int64_t e = 0; e < g.extent; ++e)
      for (int64_t i = 0; i < g.inner; ++i)
        out->value[static_cast<size_t>(o * g.inner + i)] +=
            a.values()[static_cast<size_t>((o * g.extent + e) * g.inner + i)];
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai, g]() {
    ai->ensure_grad();
    for (int64_t o = 0; o < g.outer; ++o)
      for (int64_t e = 0; e < g.extent; ++e)
        for (int64_t i = 0; i < g.inner; ++i)
          ai->grad[static_cast<size_t>((o * g.extent + e) * g.inner + i)] +=
              self->grad[static_cast<size_t>(o * g.inner + i)];
  });
}

Tensor logsumexp(const Tensor& a, int axis) {
  AxisGeom g = axis_geom(a.shape(), axis, "logsumexp");
  if (g.extent < 1) throw std::invalid_argument("logsumexp: empty axis");
  Shape oshape = a.shape();
  oshape[static_cast<size_t>(axis)] = 1;
  auto out = make_impl(oshape);
  const auto& av = a.values();
  for (int64_t o = 0; o < g.outer; ++o)
    for (int64_t i = 0; i < g.inner; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t e = 0; e < g.extent; ++e)
        mx = std::max(mx, av[static_cast<size_t>((o * g.extent + e) * g.inner + i)]);
      double s = 0.0;
      for (int64_t e = 0; e < g.extent; ++e)
        s += std::exp(av[static_cast<size_t>((o * g.extent + e) * g.inner + i)] - mx);
      out->value[static_cast<size_t>(o * g.inner + i)] = mx + std::log(s);
    }
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai, g]() {
    ai->ensure_grad();
    for (int64_t o = 0; o < g.outer; ++o)
      for (int64_t i = 0; i < g.inner; ++i) {
        const double y = self->value[static_cast<size_t>(o * g.inner + i)];
        const double gy = self->grad[static_cast<size_t>(o * g.inner + i)];
        if (gy == 0.0) continue;
        for (int64_t e = 0; e < g.extent; ++e) {
          const size_t idx = static_cast<size_t>((o * g.extent + e) * g.inner + i);
          ai->grad[idx] += gy * std::exp(ai->value[idx] - y);
        }
      }
  });
}

Tensor maxpool_points(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("maxpool_points: expects (n,F)");
  const int64_t n = a.dim(0), f = a.dim(1);
  if (n < 1) throw std::invalid_argument("maxpool_points: empty point set");
  auto out = make_impl({1, f});
  std::vector<int64_t> arg(static_cast<size_t>(f), 0);
  for (int64_t c = 0; c < f; ++c) {
    double best = a.at(0, c);
    int64_t bi = 0;
    for (int64_t r = 1; r < n; ++r)
      if (a.at(r, c) > best) {
        best = a.at(r, c);
        bi = r;
      }
    out->value[static_cast<size_t>(c)] = best;
    arg[static_cast<size_t>(c)] = bi;
  }
  TensorImpl* self = out.get();
  auto ai = a.impl();
  return finish(out, {&a}, [self, ai, arg, f]() {
    ai->ensure_grad();
    for (int64_t c = 0; c < f; ++c)
      ai->grad[static_cast<size_t>(arg[static_cast<size_t>(c)] * f + c)] +=
          self->grad[static_cast<size_t>(c)];
  });
}

// ---------------------------------------------------------------------------
// Structured ops
// ---------------------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() < 1) throw std::invalid_argument("layer_norm: rank must be >= 1");
  const int64_t d = x.shape().back();
  if (d < 2)
    throw std::invalid_argument("layer_norm: last dimension must be >= 2, got " +
                                shape_str(x.shape()));
  if (gain.size() != d || bias.size() != d)
    throw std::invalid_argument("layer_norm: gain/bias must have " + std::to_string(d) +
                                " elements");
  const int64_t rows = x.size() / d;
  auto out = make_impl(x.shape());
  const auto& xv = x.values();
  std::vector<double> mu(static_cast<size_t>(rows)), istd(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    double m = 0;
    for (int64_t c = 0; c < d; ++c) m += xv[static_cast<size_t>(r * d + c)];
    m /= static_cast<double>(d);
    double v = 0;
    for (int64_t c = 0; c < d; ++c) {
      const double t = xv[static_cast<size_t>(r * d + c)] - m;
      v += t * t;
    }
    v /= static_cast<double>(d);
    mu[static_cast<size_t>(r)] = m;
    istd[static_cast<size_t>(r)] = 1.0 / std::sqrt(v + eps);
    for (int64_t c = 0; c < d; ++c) {
      const double xhat = (xv[static_cast<size_t>(r * d + c)] - m) * istd[static_cast<size_t>(r)];
      out->value[static_cast<size_t>(r * d + c)] =
          xhat * gain.values()[static_cast<size_t>(c)] + bias.values()[static_cast<size_t>(c)];
    }
  }
  TensorImpl* self = out.get();
  auto xi = x.impl(), gi = gain.impl(), bi = bias.impl();
  return finish(out, {&x, &gain, &bias}, [self, xi, gi, bi, rows, d, mu, istd]() {
    const bool gx = xi->requires_grad, gg = gi->requires_grad, gb = bi->requires_grad;
    if (gx) xi->ensure_grad();
    if (gg) gi->ensure_grad();
    if (gb) bi->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const double m = mu[static_cast<size_t>(r)], is = istd[static_cast<size_t>(r)];
      // dxhat, plus the two row-level reductions needed for dx
      double sum_dxhat = 0, sum_dxhat_xhat = 0;
      std::vector<double> dxhat(static_cast<size_t>(d)), xhat(static_cast<size_t>(d));
      for (int64_t c = 0; c < d; ++c) {
        const size_t idx = static_cast<size_t>(r * d + c);
        xhat[static_cast<size_t>(c)] = (xi->value[idx] - m) * is;
        dxhat[static_cast<size_t>(c)] = self->grad[idx] * gi->value[static_cast<size_t>(c)];
        sum_dxhat += dxhat[static_cast<size_t>(c)];
        sum_dxhat_xhat += dxhat[static_cast<size_t>(c)] * xhat[static_cast<size_t>(c)];
        if (gg) gi->grad[static_cast<size_t>(c)] += self->grad[idx] * xhat[static_cast<size_t>(c)];
        if (gb) bi->grad[static_cast<size_t>(c)] += self->grad[idx];
      }
      if (gx) {
        const double invd = 1.0 / static_cast<double>(d);
        for (int64_t c = 0; c < d; ++c) {
          const size_t idx = static_cast<size_t>(r * d + c);
          xi->grad[idx] += is * (dxhat[static_cast<size_t>(c)] - invd * sum_dxhat -
                                 invd * xhat[static_cast<size_t>(c)] * sum_dxhat_xhat);
        }
      }
    }
  });
}

Tensor bilinear_sample(const Tensor& grid, const Tensor& points) {
  if (grid.rank() != 2) throw std::invalid_argument("bilinear_sample: grid must be (H,W)");
  if (points.rank() != 2 || points.dim(1) != 2)
    throw std::invalid_argument("bilinear_sample: points must be (n,2)");
  const int64_t h = grid.dim(0), w = grid.dim(1), n = points.dim(0);
  auto out = make_impl({n});
  struct Corner {
    int64_t r0, c0;
    double fr, fc;
    bool clamped_r, clamped_c;
  };
  std::vector<Corner> cs(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double r = points.at(i, 0), c = points.at(i, 1);
    const bool cr = r < 0.0 || r > static_cast<double>(h - 1);
    const bool cc = c < 0.0 || c > static_cast<double>(w - 1);
    r = std::clamp(r, 0.0, static_cast<double>(h - 1));
    c = std::clamp(c, 0.0, static_cast<double>(w - 1));
    int64_t r0 = h > 1 ? std::min(static_cast<int64_t>(std::floor(r)), h - 2) : 0;
    int64_t c0 = w > 1 ? std::min(static_cast<int64_t>(std::floor(c)), w - 2) : 0;
    const double fr = h > 1 ? r - static_cast<double>(r0) : 0.0;
    const double fc = w > 1 ? c - static_cast<double>(c0) : 0.0;
    cs[static_cast<size_t>(i)] = {r0, c0, fr, fc, cr, cc};
    const int64_t r1 = h > 1 ? r0 + 1 : r0, c1 = w > 1 ? c0 + 1 : c0;
    out->value[static_cast<size_t>(i)] =
        (1 - fr) * (1 - fc) * grid.at(r0, c0) + (1 - fr) * fc * grid.at(r0, c1) +
        fr * (1 - fc) * grid.at(r1, c0) + fr * fc * grid.at(r1, c1);
  }
  TensorImpl* self = out.get();
  auto gi = grid.impl(), pi = points.impl();
  return finish(out, {&grid, &points}, [self, gi, pi, cs, h, w, n]() {
    const bool gg = gi->requires_grad, gp = pi->requires_grad;
    if (gg) gi->ensure_grad();
    if (gp) pi->ensure_grad();
    for (int64_t i = 0; i < n; ++i) {
      const Corner& k = cs[static_cast<size_t>(i)];
      const double go = self->grad[static_cast<size_t>(i)];
      if (go == 0.0) continue;
      const int64_t r1 = h > 1 ? k.r0 + 1 : k.r0, c1 = w > 1 ? k.c0 + 1 : k.c0;
      const double g00 = gi->value[static_cast<size_t>(k.r0 * w + k.c0)];
      const double g01 = gi->value[static_cast<size_t>(k.r0 * w + c1)];
      const double g10 = gi->value[static_cast<size_t>(r1 * w + k.c0)];
      const double g11 = gi->value[static_cast<size_t>(r1 * w + c1)];
      if (gg) {
        gi->grad[static_cast<size_t>(k.r0 * w + k.c0)] += go * (1 - k.fr) * (1 - k.fc);
        gi->grad[static_cast<size_t>(k.r0 * w + c1)] += go * (1 - k.fr) * k.fc;
        gi->grad[static_cast<size_t>(r1 * w + k.c0)] += go * k.fr * (1 - k.fc);
        gi->grad[static_cast<size_t>(r1 * w + c1)] += go * k.fr * k.fc;
      }
      if (gp) {
        if (!k.clamped_r)
          pi->grad[static_cast<size_t>(i * 2 + 0)] +=
              go * ((1 - k.fc) * (g10 - g00) + k.fc * (g11 - g01));
        if (!k.clamped_c)
          pi->grad[static_cast<size_t>(i * 2 + 1)] +=
              go * ((1 - k.fr) * (g01 - g00) + k.fr * (g11 - g10));
      }
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  if (x.rank() != 3 || w.rank() != 4)
    throw std::invalid_argument("conv2d: x must be (Cin,H,W) and w (Cout,Cin,kh,kw)");
  const int64_t cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int64_t cout = w.dim(0), kci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (kci != cin)
    throw std::invalid_argument("conv2d: channel mismatch " + shape_str(x.shape()) +
                                " vs " + shape_str(w.shape()));
  if (kh > h || kw > ww)
    throw std::invalid_argument("conv2d: kernel " + shape_str(w.shape()) +
                                " larger than input " + shape_str(x.shape()));
  if (b.size() != cout) throw std::invalid_argument("conv2d: bias size mismatch");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  const int64_t ho = (h - kh) / stride + 1, wo = (ww - kw) / stride + 1;
  auto out = make_impl({cout, ho, wo});
  const auto& xv = x.values();
  const auto& wv = w.values();
  for (int64_t oc = 0; oc < cout; ++oc)
    for (int64_t oy = 0; oy < ho; ++oy)
      for (int64_t ox = 0; ox < wo; ++ox) {
        double acc = b.values()[static_cast<size_t>(oc)];
        for (int64_t ic = 0; ic < cin; ++ic)
          for (int64_t ky = 0; ky < kh; ++ky)
            for (int64_t kx = 0; kx < kw; ++kx)
              acc += xv[static_cast<size_t>((ic * h + oy * stride + ky) * ww + ox * stride + kx)] *
                     wv[static_cast<size_t>(((oc * cin + ic) * kh + ky) * kw + kx)];
        out->value[static_cast<size_t>((oc * ho + oy) * wo + ox)] = acc;
      }
  TensorImpl* self = out.get();
  auto xi = x.impl(), wi = w.impl(), bi = b.impl();
  return finish(out, {&x, &w, &b}, [self, xi, wi, bi, cin, h, ww, cout, kh, kw, ho, wo,
                                    stride]() {
    const bool gx = xi->requires_grad, gw = wi->requires_grad, gb = bi->requires_grad;
    if (gx) xi->ensure_grad();
    if (gw) wi->ensure_grad();
    if (gb) bi->ensure_grad();
    for (int64_t oc = 0; oc < cout; ++oc)
      for (int64_t oy = 0; oy < ho; ++oy)
        for (int64_t ox = 0; ox < wo; ++ox) {
          const double g = self->grad[static_cast<size_t>((oc * ho + oy) * wo + ox)];
          if (g == 0.0) continue;
          if (gb) bi->grad[static_cast<size_t>(oc)] += g;
          for (int64_t ic = 0; ic < cin; ++ic)
            for (int64_t ky = 0; ky < kh; ++ky)
              for (int64_t kx = 0; kx < kw; ++kx) {
                const size_t xidx = static_cast<size_t>(
                    (ic * h + oy * stride + ky) * ww + ox * stride + kx);
                const size_t widx =
                    static_cast<size_t>(((oc * cin + ic) * kh + ky) * kw + kx);
                if (gx) xi->grad[xidx] += g * wi->value[widx];
                if (gw) wi->grad[widx] += g * xi->value[xidx];
              }
        }
  });
}

namespace {
int64_t reflect_index(int64_t i, int64_t n) {
  // symmetric reflection with edge repeat: -1 -> 0, n -> n-1
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}
}  // namespace

std::vector<double> gaussian_kernel_1d(double sigma, double trunc) {
  const int64_t radius = static_cast<int64_t>(std::ceil(trunc * sigma));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double s = 0;
  for (int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    s += v;
  }
  for (double& v : k) v /= s;
  return k;
}

Tensor gaussian_smooth(const Tensor& x, double sigma, double trunc) {
  if (x.rank() != 2) throw std::invalid_argument("gaussian_smooth: expects (H,W)");
  if (!(sigma > 0)) throw std::invalid_argument("gaussian_smooth: sigma must be > 0");
  const int64_t h = x.dim(0), w = x.dim(1);
  const std::vector<double> k = gaussian_kernel_1d(sigma, trunc);
  const int64_t radius = (static_cast<int64_t>(k.size()) - 1) / 2;

  auto pass = [&](const std::vector<double>& in, std::vector<double>& outv, bool rows_dir) {
    // rows_dir: smooth along columns index (horizontal) when false? we smooth
    // along axis: false = along width, true = along height
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c) {
        double acc = 0;
        for (int64_t t = -radius; t <= radius; ++t) {
          int64_t rr = r, cc = c;
          if (rows_dir)
            rr = reflect_index(r + t, h);
          else
            cc = reflect_index(c + t, w);
          acc += k[static_cast<size_t>(t + radius)] * in[static_cast<size_t>(rr * w + cc)];
        }
        outv[static_cast<size_t>(r * w + c)] = acc;
      }
  };

  std::vector<double> tmp(static_cast<size_t>(h * w));
  auto out = make_impl({h, w});
  pass(x.values(), tmp, false);
  pass(tmp, out->value, true);

  TensorImpl* self = out.get();
  auto xi = x.impl();
  return finish(out, {&x}, [self, xi, k, radius, h, w]() {
    xi->ensure_grad();
    // adjoint: scatter through the same index/weight maps, vertical then horizontal
    std::vector<double> tmp2(static_cast<size_t>(h * w), 0.0);
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c) {
        const double g = self->grad[static_cast<size_t>(r * w + c)];
        if (g == 0.0) continue;
        for (int64_t t = -radius; t <= radius; ++t) {
          const int64_t rr = reflect_index(r + t, h);
          tmp2[static_cast<size_t>(rr * w + c)] += k[static_cast<size_t>(t + radius)] * g;
        }
      }
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c) {
        const double g = tmp2[static_cast<size_t>(r * w + c)];
        if (g == 0.0) continue;
        for (int64_t t = -radius; t <= radius; ++t) {
          const int64_t cc = reflect_index(c + t, w);
          xi->grad[static_cast<size_t>(r * w + cc)] += k[static_cast<size_t>(t + radius)] * g;
        }
      }
  });
}

Tensor gaussian_nll(const Tensor& mu, const Tensor& log_var, const Tensor& target) {
  check_same_shape(mu, log_var, "gaussian_nll");
  check_same_shape(mu, target, "gaussian_nll");
  // 0.5 * sum(log 2pi + lv + (t-mu)^2 * exp(-lv))
  Tensor diff = sub(target, mu);
  Tensor quad = mul(square(diff), exp_op(neg(log_var)));
  Tensor per = add(add_scalar(log_var, kLog2Pi), quad);
  return mul_scalar(sum(per), 0.5);
}

Tensor diag_gaussian_kl(const Tensor& mean_p, const Tensor& log_var_p,
                        const Tensor& mean_q, const Tensor& log_var_q) {
  check_same_shape(mean_p, mean_q, "diag_gaussian_kl");
  check_same_shape(log_var_p, log_var_q, "diag_gaussian_kl");
  check_same_shape(mean_p, log_var_p, "diag_gaussian_kl");
  // KL(p || q) = 0.5 * sum(lvq - lvp - 1 + exp(lvp - lvq) + (mp-mq)^2 exp(-lvq))
  Tensor dlv = sub(log_var_q, log_var_p);
  Tensor ratio = exp_op(sub(log_var_p, log_var_q));
  Tensor quad = mul(square(sub(mean_p, mean_q)), exp_op(neg(log_var_q)));
  Tensor per = add(add(add_scalar(dlv, -1.0), ratio), quad);
  return mul_scalar(sum(per), 0.5);
}

}  // namespace semnav::ad
