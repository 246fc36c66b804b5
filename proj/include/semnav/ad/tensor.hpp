#pragma once
// Reverse-mode automatic differentiation over dense row-major double arrays.
//
// Design: every op result keeps edges to its inputs plus a closure that
// pushes adjoints back through those edges. A Tape records results in
// creation order; since inputs always precede outputs, walking the tape
// backwards is a valid reverse topological order.
//
// Ops record onto the active tape only when some input has gradient
// tracking enabled. With no active tape (or tracking disabled) the same
// functions run as plain forward arithmetic, so inference code pays for
// nothing and tensors are safely shareable across threads.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace semnav::ad {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily, first use in backward()
  bool requires_grad = false;
  // set for op results recorded on a tape
  std::function<void()> backprop;
  std::vector<std::shared_ptr<TensorImpl>> parents;

  void ensure_grad();
  void zero_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t size() const { return static_cast<int64_t>(impl_->value.size()); }
  int64_t dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool b) { impl_->requires_grad = b; }

  const std::vector<double>& values() const { return impl_->value; }
  std::vector<double>& mutable_values() { return impl_->value; }
  const std::vector<double>& grads() const;
  void zero_grad() { impl_->zero_grad(); }

  double item() const;
  double at(int64_t i) const { return impl_->value[static_cast<size_t>(i)]; }
  double at(int64_t r, int64_t c) const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of op results for one forward pass. Single writer; a second
// backward() without fresh recording is rejected, as is recording after
// backward without reset().
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  void record(std::shared_ptr<TensorImpl> node);
  // Seeds root grad with 1 (root must be scalar) and replays the tape in
  // reverse creation order.
  void backward(const Tensor& root);
  void reset();
  size_t node_count() const { return nodes_.size(); }

 private:
  friend struct NoGrad;
  std::vector<std::shared_ptr<TensorImpl>> nodes_;
  bool consumed_ = false;
  Tape* prev_ = nullptr;
};

// Suspends recording for the enclosed scope; results come out untracked.
struct NoGrad {
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  Tape* saved;
};

// ---------------------------------------------------------------------------
// Elementwise / broadcast ops. Broadcast rule: shapes are right-aligned and
// each aligned extent must match or be 1; anything else throws.
// ---------------------------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor tanh_op(const Tensor& a);
Tensor clamp_op(const Tensor& a, double lo, double hi);  // zero gradient outside
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);      // throws std::domain_error on x <= 0
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);

// ---------------------------------------------------------------------------
// Linear algebra & shape ops
// ---------------------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& a, Shape new_shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);  // rank 1 or 2
Tensor slice_cols(const Tensor& a, int64_t from, int64_t to);  // 2-D
Tensor slice_rows(const Tensor& a, int64_t from, int64_t to);  // 2-D
Tensor transpose2d(const Tensor& a);

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis);      // keepdims
Tensor logsumexp(const Tensor& a, int axis);     // keepdims, max-shifted
Tensor maxpool_points(const Tensor& a);          // (n,F) -> (1,F), max over rows

// ---------------------------------------------------------------------------
// Structured ops
// ---------------------------------------------------------------------------
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// grid (H,W), points (n,2) as continuous (row, col); clamped to the grid with
// zero boundary gradient for the point coordinates.
Tensor bilinear_sample(const Tensor& grid, const Tensor& points);

// x (Cin,H,W), w (Cout,Cin,kh,kw), b (Cout); valid padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride);

// (H,W) Gaussian smoothing, kernel truncated at trunc*sigma, reflective
// border. Separable; differentiable via the same index/weight maps.
Tensor gaussian_smooth(const Tensor& x, double sigma, double trunc = 3.0);
std::vector<double> gaussian_kernel_1d(double sigma, double trunc = 3.0);

// Scalar losses
Tensor gaussian_nll(const Tensor& mean, const Tensor& log_var, const Tensor& target);
Tensor diag_gaussian_kl(const Tensor& mean_p, const Tensor& log_var_p,
                        const Tensor& mean_q, const Tensor& log_var_q);

}  // namespace semnav::ad
