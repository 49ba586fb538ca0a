#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "gradcheck.hpp"
#include "ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace mhsi::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, float lo = -1.0f, float hi = 1.0f, bool requires_grad = true) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.mutable_data()) v = rng.uniform(lo, hi);
  return t;
}

// Fixed positive weights so a reduction to scalar does not hide errors
// behind symmetric gradients.
inline Tensor weights_like(const Tensor& t, Rng& rng) {
  return random_tensor(t.shape(), rng, 0.5f, 1.5f, false);
}

// Weights of magnitude [0.5, 1.5] and random sign: the loss stays small, so
// its float rounding does not swamp the finite differences.
inline Tensor signed_weights_like(const Tensor& t, Rng& rng) {
  Tensor w = weights_like(t, rng);
  for (auto& v : w.mutable_data())
    if (rng.uniform() < 0.5f) v = -v;
  return w;
}

inline Tensor weighted_sum(const Tensor& t, const Tensor& w) { return ops::sum(ops::mul(t, w)); }

// Finite-difference check of every output entry separately (one Jacobian
// row per scalar); the probed scalar is a single element, so no reduction
// rounding enters the differences.
inline double jacobian_error(const std::function<Tensor()>& y, const Tensor& x, float step) {
  const Tensor probe = y();
  double worst = 0.0;
  for (std::size_t j = 0; j < probe.numel(); ++j) {
    Tensor pick = Tensor::zeros(probe.shape());
    pick.mutable_data()[j] = 1.0f;
    worst = std::max(worst, finite_diff_check([&] { return ops::sum(ops::mul(y(), pick)); }, x, step));
  }
  return worst;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    m = std::max(m, d < 0 ? -d : d);
  }
  return m;
}

}  // namespace mhsi::testing
