#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mhsi {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl;

// One recorded operation. `backward` reads the output's data and grad and
// accumulates into the parents' grad buffers.
struct Node {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node> node;

  std::vector<float>& grad_buffer();
};

}  // namespace detail

// Dense row-major float32 tensor with shared ownership. Copies alias the same
// storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> data, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const float> data() const;
  // Writable view for initialization and optimizer updates. Mutating a tensor
  // that already feeds a recorded graph invalidates that graph's gradients.
  std::span<float> mutable_data();
  float item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;
  // Name of the producing op, empty for leaves.
  std::string_view op_name() const;

  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  // Same values, no graph, no grad.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  detail::TensorImpl& impl() const { return *impl_; }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Reverse-mode sweep from a scalar. Gradients accumulate into every reachable
// tensor with requires_grad; callers zero them between steps.
void backward(const Tensor& loss);

bool grad_enabled();

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Non-finite trapping. Defaults to on when MAMBAHSI_TRAP_NONFINITE is set to a
// value other than "0" in the environment.
bool nonfinite_trap_enabled();
void set_nonfinite_trap(bool on);

// Op-authoring helpers.
using BackwardFn = std::function<void(const detail::TensorImpl& out)>;

// Wraps `data` into a tensor produced by `op`. Records a node when grad mode is
// on and any input requires grad. Runs the non-finite check when enabled.
Tensor make_result(std::string_view op, Shape shape, std::vector<float> data,
                   const std::vector<Tensor>& inputs, BackwardFn backward);

// Grad buffer of `t` if it participates in differentiation, else empty.
std::span<float> grad_target(const Tensor& t);

}  // namespace mhsi
