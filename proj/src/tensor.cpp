#include "tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <unordered_set>

#include "error.hpp"

namespace mhsi {

namespace {

thread_local bool g_grad_enabled = true;

bool trap_from_env() {
  const char* v = std::getenv("MAMBAHSI_TRAP_NONFINITE");
  return v != nullptr && std::string_view(v) != "0" && std::string_view(v) != "";
}

bool& trap_flag() {
  static bool flag = trap_from_env();
  return flag;
}

std::shared_ptr<detail::TensorImpl> make_impl(Shape shape, std::vector<float> data, bool rg) {
  auto impl = std::make_shared<detail::TensorImpl>();
  if (shape_numel(shape) != data.size()) {
    fail(ErrorCode::kShape, "tensor: shape " + shape_str(shape) + " holds " +
                                std::to_string(shape_numel(shape)) + " elements, got " +
                                std::to_string(data.size()));
  }
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = rg;
  return impl;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<float>& detail::TensorImpl::grad_buffer() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<float>(n, 0.0f), requires_grad));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<float>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<float> data, bool requires_grad) {
  return Tensor(make_impl(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return Tensor(make_impl(Shape{1}, std::vector<float>{value}, requires_grad));
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    fail(ErrorCode::kShape, "tensor: axis " + std::to_string(axis) + " out of range for " +
                                shape_str(impl_->shape));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<const float> Tensor::data() const { return impl_->data; }
std::span<float> Tensor::mutable_data() { return impl_->data; }

float Tensor::item() const {
  if (numel() != 1) fail(ErrorCode::kShape, "item: tensor " + shape_str(shape()) + " is not scalar");
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return impl_->node == nullptr; }

std::string_view Tensor::op_name() const {
  return impl_->node ? std::string_view(impl_->node->op) : std::string_view();
}

bool Tensor::has_grad() const { return impl_->grad.size() == impl_->data.size() && !impl_->data.empty(); }

std::span<const float> Tensor::grad() const { return impl_->grad; }

std::span<float> Tensor::mutable_grad() { return impl_->grad_buffer(); }

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::detach() const { return Tensor(make_impl(impl_->shape, impl_->data, false)); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool nonfinite_trap_enabled() { return trap_flag(); }
void set_nonfinite_trap(bool on) { trap_flag() = on; }

Tensor make_result(std::string_view op, Shape shape, std::vector<float> data,
                   const std::vector<Tensor>& inputs, BackwardFn backward) {
  if (nonfinite_trap_enabled()) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!std::isfinite(data[i])) {
        fail(ErrorCode::kNumeric, std::string(op) + ": non-finite output at flat index " +
                                      std::to_string(i) + " of " + shape_str(shape));
      }
    }
  }
  auto impl = make_impl(std::move(shape), std::move(data), false);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any = any || (in.defined() && in.requires_grad());
    if (any) {
      auto node = std::make_shared<detail::Node>();
      node->op = std::string(op);
      for (const auto& in : inputs) {
        if (in.defined()) node->parents.push_back(in.impl_ptr());
      }
      node->backward = std::move(backward);
      impl->node = std::move(node);
      impl->requires_grad = true;
    }
  }
  return Tensor(std::move(impl));
}

std::span<float> grad_target(const Tensor& t) {
  if (!t.defined() || !t.requires_grad()) return {};
  return t.impl().grad_buffer();
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    fail(ErrorCode::kShape, "backward: loss must be a scalar, got " +
                                (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    fail(ErrorCode::kUsage, "backward: loss does not lie on a differentiation graph");
  }

  // Iterative post-order DFS: each node is emitted once, after its parents.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> visited;
  struct Frame {
    detail::TensorImpl* impl;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.impl_ptr().get(), 0});
  visited.insert(loss.impl_ptr().get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto* node = top.impl->node.get();
    if (node != nullptr && top.next_parent < node->parents.size()) {
      detail::TensorImpl* parent = node->parents[top.next_parent++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
      continue;
    }
    order.push_back(top.impl);
    stack.pop_back();
  }

  loss.impl().grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* impl = *it;
    if (impl->node && impl->grad.size() == impl->data.size()) impl->node->backward(*impl);
  }
}

}  // namespace mhsi
