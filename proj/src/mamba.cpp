#include "mamba.hpp"

#include <cmath>

#include "error.hpp"
#include "ops.hpp"

namespace mhsi {

void fill_uniform(Tensor& t, Rng& rng, float bound) {
  for (auto& v : t.mutable_data()) v = rng.uniform(-bound, bound);
}

MambaLayer::MambaLayer(MambaDims dims) : dims_(dims) {
  if (dims.model_width == 0 || dims.expand == 0 || dims.state_size == 0 || dims.conv_width == 0) {
    fail(ErrorCode::kUsage, "MambaLayer: all dimensions must be >= 1");
  }
  const std::size_t d = dims.model_width;
  const std::size_t e = dims.inner_width();
  const std::size_t n = dims.state_size;
  const std::size_t r = dims.dt_rank();
  in_proj = Tensor::zeros({d, 2 * e}, true);
  conv_w = Tensor::zeros({e, dims.conv_width}, true);
  conv_b = Tensor::zeros({e}, true);
  x_proj = Tensor::zeros({e, r + 2 * n}, true);
  dt_proj_w = Tensor::zeros({r, e}, true);
  dt_proj_b = Tensor::zeros({e}, true);
  a_log = Tensor::zeros({e, n}, true);
  d_skip = Tensor::zeros({e}, true);
  out_proj = Tensor::zeros({e, d}, true);
}

void MambaLayer::initialize(Rng& rng) {
  const std::size_t d = dims_.model_width;
  const std::size_t e = dims_.inner_width();
  const std::size_t n = dims_.state_size;
  const std::size_t r = dims_.dt_rank();
  fill_uniform(in_proj, rng, 1.0f / std::sqrt(static_cast<float>(d)));
  fill_uniform(conv_w, rng, 1.0f / std::sqrt(static_cast<float>(dims_.conv_width)));
  fill_uniform(conv_b, rng, 1.0f / std::sqrt(static_cast<float>(dims_.conv_width)));
  fill_uniform(x_proj, rng, 1.0f / std::sqrt(static_cast<float>(e)));
  fill_uniform(dt_proj_w, rng, 1.0f / std::sqrt(static_cast<float>(r)));
  const double lo = std::log(1e-3);
  const double hi = std::log(1e-1);
  auto bias = dt_proj_b.mutable_data();
  for (auto& v : bias) {
    const double dt = std::exp(lo + (hi - lo) * rng.uniform_double());
    v = static_cast<float>(dt + std::log(-std::expm1(-dt)));  // softplus^{-1}(dt)
  }
  auto al = a_log.mutable_data();
  for (std::size_t c = 0; c < e; ++c)
    for (std::size_t s = 0; s < n; ++s) al[c * n + s] = std::log(static_cast<float>(s + 1));
  for (auto& v : d_skip.mutable_data()) v = 1.0f;
  fill_uniform(out_proj, rng, 1.0f / std::sqrt(static_cast<float>(e)));
}

Tensor MambaLayer::forward(const Tensor& x, ScanMode mode) const {
  if (x.rank() != 3 || x.dim(2) != dims_.model_width) {
    fail(ErrorCode::kShape, "mamba: expected [S, L, " + std::to_string(dims_.model_width) + "] tokens, got " +
                                shape_str(x.shape()));
  }
  const std::size_t e = dims_.inner_width();
  const std::size_t n = dims_.state_size;
  const std::size_t r = dims_.dt_rank();
  if (x.dim(1) == 0 || x.dim(0) == 0) return Tensor::zeros(x.shape());

  Tensor xz = ops::linear(x, in_proj);
  Tensor xs = ops::slice(xz, 2, 0, e);
  Tensor z = ops::slice(xz, 2, e, e);
  xs = ops::silu(ops::depthwise_causal_conv1d(xs, conv_w, conv_b));
  Tensor dbl = ops::linear(xs, x_proj);
  Tensor dt = ops::slice(dbl, 2, 0, r);
  Tensor b = ops::slice(dbl, 2, r, n);
  Tensor c = ops::slice(dbl, 2, r + n, n);
  Tensor delta = ops::softplus(ops::linear(dt, dt_proj_w, dt_proj_b));
  Tensor a = ops::scale(ops::exp(a_log), -1.0f);
  Tensor y = selective_scan(xs, delta, a, b, c, d_skip, mode);
  y = ops::mul(y, ops::silu(z));
  return ops::linear(y, out_proj);
}

std::vector<NamedTensor> MambaLayer::parameters(const std::string& prefix) const {
  return {
      {prefix + "in_proj", in_proj},   {prefix + "conv_w", conv_w},       {prefix + "conv_b", conv_b},
      {prefix + "x_proj", x_proj},     {prefix + "dt_proj_w", dt_proj_w}, {prefix + "dt_proj_b", dt_proj_b},
      {prefix + "a_log", a_log},       {prefix + "d_skip", d_skip},       {prefix + "out_proj", out_proj},
  };
}

}  // namespace mhsi
