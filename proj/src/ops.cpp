#include "ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "error.hpp"

namespace mhsi::ops {

namespace {

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  fail(ErrorCode::kShape, std::string(op) + ": " + detail);
}

void axpy(float* y, float a, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// out[r, :] = bias + x[r, :] * w for rows in [0, rows). Four rows share each
// pass over w.
void gemm_rows(const float* x, const float* w, const float* bias, float* out, std::size_t rows,
               std::size_t in, std::size_t outw) {
  constexpr std::size_t kTile = 4;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    const std::size_t r1 = std::min(rows, r0 + kTile);
    for (std::size_t r = r0; r < r1; ++r) {
      float* o = out + r * outw;
      if (bias != nullptr) {
        std::copy(bias, bias + outw, o);
      } else {
        std::fill(o, o + outw, 0.0f);
      }
    }
    for (std::size_t i = 0; i < in; ++i) {
      const float* wrow = w + i * outw;
      for (std::size_t r = r0; r < r1; ++r) axpy(out + r * outw, x[r * in + i], wrow, outw);
    }
  }
}

Tensor linear_impl(const char* op, const Tensor& x, const Tensor& w, const Tensor& bias,
                   Shape out_shape, std::size_t rows) {
  const std::size_t in = w.dim(0);
  const std::size_t outw = w.dim(1);
  std::vector<float> out(rows * outw);
  gemm_rows(x.data().data(), w.data().data(), bias.defined() ? bias.data().data() : nullptr,
            out.data(), rows, in, outw);
  return make_result(op, std::move(out_shape), std::move(out), {x, w, bias},
                     [x, w, bias, rows, in, outw](const detail::TensorImpl& o) {
                       const float* g = o.grad.data();
                       if (auto gx = grad_target(x); !gx.empty()) {
                         std::vector<float> wt(in * outw);
                         const float* wd = w.data().data();
                         for (std::size_t i = 0; i < in; ++i)
                           for (std::size_t j = 0; j < outw; ++j) wt[j * in + i] = wd[i * outw + j];
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < outw; ++j)
                             axpy(gx.data() + r * in, g[r * outw + j], wt.data() + j * in, in);
                       }
                       if (auto gw = grad_target(w); !gw.empty()) {
                         const float* xd = x.data().data();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t i = 0; i < in; ++i)
                             axpy(gw.data() + i * outw, xd[r * in + i], g + r * outw, outw);
                       }
                       if (auto gb = grad_target(bias); !gb.empty()) {
                         for (std::size_t r = 0; r < rows; ++r) axpy(gb.data(), 1.0f, g + r * outw, outw);
                       }
                     });
}

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(const char* op, BinaryKind kind, const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  Shape out_shape;
  if (sa == sb || (a.numel() >= b.numel() && (b.numel() == 1 || is_suffix(sb, sa)))) {
    out_shape = sa;
  } else if (b.numel() > a.numel() && (a.numel() == 1 || is_suffix(sa, sb))) {
    out_shape = sb;
  } else {
    shape_error(op, "cannot broadcast " + shape_str(sa) + " with " + shape_str(sb));
  }
  const std::size_t n = shape_numel(out_shape);
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  std::vector<float> out(n);
  switch (kind) {
    case BinaryKind::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = pa[i % na] + pb[i % nb];
      break;
    case BinaryKind::kSub:
      for (std::size_t i = 0; i < n; ++i) out[i] = pa[i % na] - pb[i % nb];
      break;
    case BinaryKind::kMul:
      for (std::size_t i = 0; i < n; ++i) out[i] = pa[i % na] * pb[i % nb];
      break;
  }
  return make_result(op, std::move(out_shape), std::move(out), {a, b},
                     [a, b, kind, n, na, nb](const detail::TensorImpl& o) {
                       const float* g = o.grad.data();
                       if (auto ga = grad_target(a); !ga.empty()) {
                         if (kind == BinaryKind::kMul) {
                           const float* pb = b.data().data();
                           for (std::size_t i = 0; i < n; ++i) ga[i % na] += g[i] * pb[i % nb];
                         } else {
                           for (std::size_t i = 0; i < n; ++i) ga[i % na] += g[i];
                         }
                       }
                       if (auto gb = grad_target(b); !gb.empty()) {
                         if (kind == BinaryKind::kMul) {
                           const float* pa = a.data().data();
                           for (std::size_t i = 0; i < n; ++i) gb[i % nb] += g[i] * pa[i % na];
                         } else if (kind == BinaryKind::kSub) {
                           for (std::size_t i = 0; i < n; ++i) gb[i % nb] -= g[i];
                         } else {
                           for (std::size_t i = 0; i < n; ++i) gb[i % nb] += g[i];
                         }
                       }
                     });
}

// Unary elementwise op; `deriv(x, y)` gives dy/dx.
template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto xs = x.data();
  std::vector<float> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = fwd(xs[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [x, deriv](const detail::TensorImpl& o) {
    auto gx = grad_target(x);
    if (gx.empty()) return;
    const auto xs = x.data();
    for (std::size_t i = 0; i < xs.size(); ++i) gx[i] += o.grad[i] * deriv(xs[i], o.data[i]);
  });
}

float sigmoid_scalar(float v) {
  if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
  const float e = std::exp(v);
  return e / (1.0f + e);
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    shape_error("matmul", "incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  return linear_impl("matmul", a, b, Tensor{}, Shape{a.dim(0), b.dim(1)}, a.dim(0));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.rank() != 2 || x.rank() == 0 || x.shape().back() != w.dim(0)) {
    shape_error("linear", "input " + shape_str(x.shape()) + " does not match weight " + shape_str(w.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != w.dim(1))) {
    shape_error("linear", "bias " + shape_str(bias.shape()) + " does not match weight " + shape_str(w.shape()));
  }
  Shape out_shape = x.shape();
  out_shape.back() = w.dim(1);
  return linear_impl("linear", x, w, bias, std::move(out_shape), x.numel() / w.dim(0));
}

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", BinaryKind::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", BinaryKind::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", BinaryKind::kMul, a, b); }

Tensor add_scalar(const Tensor& x, float c) {
  return unary("add_scalar", x, [c](float v) { return v + c; }, [](float, float) { return 1.0f; });
}

Tensor scale(const Tensor& x, float c) {
  return unary("scale", x, [c](float v) { return v * c; }, [c](float, float) { return c; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      "softplus", x, [](float v) { return v > 20.0f ? v : std::log1p(std::exp(v)); },
      [](float v, float) { return sigmoid_scalar(v); });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, sigmoid_scalar, [](float, float y) { return y * (1.0f - y); });
}

Tensor silu(const Tensor& x) {
  return unary(
      "silu", x, [](float v) { return v * sigmoid_scalar(v); },
      [](float v, float) {
        const float s = sigmoid_scalar(v);
        return s * (1.0f + v * (1.0f - s));
      });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) shape_error("softmax", "axis " + std::to_string(axis) + " out of range for " + shape_str(x.shape()));
  const AxisSplit sp = split_axis(x.shape(), axis);
  const float* xs = x.data().data();
  std::vector<float> out(x.numel());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.n * sp.inner + in;
      float mx = xs[base];
      for (std::size_t k = 1; k < sp.n; ++k) mx = std::max(mx, xs[base + k * sp.inner]);
      float total = 0.0f;
      for (std::size_t k = 0; k < sp.n; ++k) {
        const float e = std::exp(xs[base + k * sp.inner] - mx);
        out[base + k * sp.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < sp.n; ++k) out[base + k * sp.inner] /= total;
    }
  }
  return make_result("softmax", x.shape(), std::move(out), {x}, [x, sp](const detail::TensorImpl& o) {
    auto gx = grad_target(x);
    if (gx.empty()) return;
    for (std::size_t ou = 0; ou < sp.outer; ++ou) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = ou * sp.n * sp.inner + in;
        float dot = 0.0f;
        for (std::size_t k = 0; k < sp.n; ++k) {
          const std::size_t i = base + k * sp.inner;
          dot += o.grad[i] * o.data[i];
        }
        for (std::size_t k = 0; k < sp.n; ++k) {
          const std::size_t i = base + k * sp.inner;
          gx[i] += o.data[i] * (o.grad[i] - dot);
        }
      }
    }
  });
}

Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gamma, const Tensor& beta, float eps) {
  if (x.rank() < 2) shape_error("group_norm", "input " + shape_str(x.shape()) + " needs rank >= 2");
  const std::size_t channels = x.shape().back();
  if (groups == 0 || channels % groups != 0) {
    shape_error("group_norm", std::to_string(channels) + " channels not divisible into " +
                                  std::to_string(groups) + " groups");
  }
  if (gamma.numel() != channels || beta.numel() != channels) {
    shape_error("group_norm", "affine " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                                  " does not match " + std::to_string(channels) + " channels");
  }
  const std::size_t batch = x.dim(0);
  const std::size_t positions = x.numel() / (batch * channels);
  const std::size_t width = channels / groups;
  const double count = static_cast<double>(positions * width);
  const float* xs = x.data().data();
  const float* gs = gamma.data().data();
  const float* bs = beta.data().data();

  std::vector<float> out(x.numel());
  auto xhat = std::make_shared<std::vector<float>>(x.numel());
  auto rstd = std::make_shared<std::vector<float>>(batch * groups);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t off = b * positions * channels;
    for (std::size_t g = 0; g < groups; ++g) {
      // Statistics accumulate in double over the group, positions outer.
      double total = 0.0;
      for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t c = g * width; c < (g + 1) * width; ++c) total += xs[off + p * channels + c];
      const double mean = total / count;
      double sq = 0.0;
      for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t c = g * width; c < (g + 1) * width; ++c) {
          const double d = xs[off + p * channels + c] - mean;
          sq += d * d;
        }
      const float mu = static_cast<float>(mean);
      const float r = static_cast<float>(1.0 / std::sqrt(sq / count + eps));
      (*rstd)[b * groups + g] = r;
      for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t c = g * width; c < (g + 1) * width; ++c) {
          const std::size_t i = off + p * channels + c;
          const float h = (xs[i] - mu) * r;
          (*xhat)[i] = h;
          out[i] = h * gs[c] + bs[c];
        }
    }
  }
  return make_result(
      "group_norm", x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, rstd, batch, positions, channels, groups, width, count](const detail::TensorImpl& o) {
        const float* g = o.grad.data();
        const float* h = xhat->data();
        if (auto gg = grad_target(gamma); !gg.empty()) {
          for (std::size_t i = 0; i < o.grad.size(); ++i) gg[i % channels] += g[i] * h[i];
        }
        if (auto gb = grad_target(beta); !gb.empty()) {
          for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i % channels] += g[i];
        }
        auto gx = grad_target(x);
        if (gx.empty()) return;
        const float* gs = gamma.data().data();
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t off = b * positions * channels;
          for (std::size_t grp = 0; grp < groups; ++grp) {
            double sum_d = 0.0;
            double sum_dh = 0.0;
            for (std::size_t p = 0; p < positions; ++p)
              for (std::size_t c = grp * width; c < (grp + 1) * width; ++c) {
                const std::size_t i = off + p * channels + c;
                const double d = static_cast<double>(g[i]) * gs[c];
                sum_d += d;
                sum_dh += d * h[i];
              }
            const float mean_d = static_cast<float>(sum_d / count);
            const float mean_dh = static_cast<float>(sum_dh / count);
            const float r = (*rstd)[b * groups + grp];
            for (std::size_t p = 0; p < positions; ++p)
              for (std::size_t c = grp * width; c < (grp + 1) * width; ++c) {
                const std::size_t i = off + p * channels + c;
                gx[i] += r * (g[i] * gs[c] - mean_d - h[i] * mean_dh);
              }
          }
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    shape_error("reshape", "cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {x}, [x](const detail::TensorImpl& o) {
    auto gx = grad_target(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i];
  });
}

Tensor flatten(const Tensor& x, std::size_t start_axis) {
  if (start_axis >= x.rank()) shape_error("flatten", "axis out of range for " + shape_str(x.shape()));
  Shape s(x.shape().begin(), x.shape().begin() + static_cast<std::ptrdiff_t>(start_axis));
  std::size_t tail = 1;
  for (std::size_t i = start_axis; i < x.rank(); ++i) tail *= x.dim(i);
  s.push_back(tail);
  return reshape(x, std::move(s));
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t rank = x.rank();
  std::vector<std::size_t> seen(rank, 0);
  if (perm.size() != rank) shape_error("permute", "permutation size does not match " + shape_str(x.shape()));
  for (auto p : perm) {
    if (p >= rank || seen[p]++) shape_error("permute", "invalid permutation for " + shape_str(x.shape()));
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = x.dim(perm[i]);
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * x.dim(i);
  // Source flat index for each destination flat index.
  auto src = std::make_shared<std::vector<std::size_t>>(x.numel());
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < x.numel(); ++flat) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < rank; ++i) s += idx[i] * in_strides[perm[i]];
    (*src)[flat] = s;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<float> out(x.numel());
  const float* xs = x.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xs[(*src)[i]];
  return make_result("permute", std::move(out_shape), std::move(out), {x}, [x, src](const detail::TensorImpl& o) {
    auto gx = grad_target(x);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < o.grad.size(); ++i) gx[(*src)[i]] += o.grad[i];
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || start + length > x.dim(axis)) {
    shape_error("slice", "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                             ") on axis " + std::to_string(axis) + " out of bounds for " + shape_str(x.shape()));
  }
  const AxisSplit sp = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<float> out(sp.outer * length * sp.inner);
  const float* xs = x.data().data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(xs + (o * sp.n + start) * sp.inner, length * sp.inner, out.data() + o * length * sp.inner);
  }
  return make_result("slice", std::move(out_shape), std::move(out), {x},
                     [x, sp, start, length](const detail::TensorImpl& o) {
                       auto gx = grad_target(x);
                       if (gx.empty()) return;
                       const std::size_t run = length * sp.inner;
                       for (std::size_t ou = 0; ou < sp.outer; ++ou) {
                         axpy(gx.data() + (ou * sp.n + start) * sp.inner, 1.0f, o.grad.data() + ou * run, run);
                       }
                     });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) shape_error("concat", "no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) shape_error("concat", "axis out of range for " + shape_str(first));
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape a = p.shape();
    Shape b = first;
    if (a.size() != b.size()) shape_error("concat", "rank mismatch " + shape_str(a) + " vs " + shape_str(b));
    a[axis] = b[axis] = 0;
    if (a != b) shape_error("concat", "shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(first));
    total += p.dim(axis);
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  const AxisSplit sp = split_axis(out_shape, axis);
  std::vector<float> out(shape_numel(out_shape));
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t run = p.dim(axis) * sp.inner;
    const float* ps = p.data().data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(ps + o * run, run, out.data() + (o * total + offset) * sp.inner);
    }
    offset += p.dim(axis);
  }
  return make_result("concat", std::move(out_shape), std::move(out), parts,
                     [parts, offsets, sp, total, axis](const detail::TensorImpl& o) {
                       for (std::size_t k = 0; k < parts.size(); ++k) {
                         auto gp = grad_target(parts[k]);
                         if (gp.empty()) continue;
                         const std::size_t run = parts[k].dim(axis) * sp.inner;
                         for (std::size_t ou = 0; ou < sp.outer; ++ou) {
                           axpy(gp.data() + ou * run, 1.0f, o.grad.data() + (ou * total + offsets[k]) * sp.inner, run);
                         }
                       }
                     });
}

// Scalar reductions accumulate in double, in index order.
Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (float v : x.data()) total += v;
  return make_result("sum", Shape{1}, {static_cast<float>(total)}, {x}, [x](const detail::TensorImpl& o) {
    auto gx = grad_target(x);
    for (auto& g : gx) g += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) shape_error("mean", "empty input");
  double total = 0.0;
  for (float v : x.data()) total += v;
  const float n = static_cast<float>(x.numel());
  return make_result("mean", Shape{1}, {static_cast<float>(total / x.numel())}, {x}, [x, n](const detail::TensorImpl& o) {
    auto gx = grad_target(x);
    const float g = o.grad[0] / n;
    for (auto& v : gx) v += g;
  });
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) shape_error("sum_axis", "axis out of range for " + shape_str(x.shape()));
  const AxisSplit sp = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<float> out(sp.outer * sp.inner, 0.0f);
  const float* xs = x.data().data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t k = 0; k < sp.n; ++k)
      axpy(out.data() + o * sp.inner, 1.0f, xs + (o * sp.n + k) * sp.inner, sp.inner);
  if (out_shape.empty()) out_shape.push_back(1);
  return make_result("sum_axis", std::move(out_shape), std::move(out), {x}, [x, sp](const detail::TensorImpl& o) {
    auto gx = grad_target(x);
    if (gx.empty()) return;
    for (std::size_t ou = 0; ou < sp.outer; ++ou)
      for (std::size_t k = 0; k < sp.n; ++k)
        axpy(gx.data() + (ou * sp.n + k) * sp.inner, 1.0f, o.grad.data() + ou * sp.inner, sp.inner);
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  if (x.rank() != 2) shape_error("gather_rows", "input " + shape_str(x.shape()) + " must be rank 2");
  const std::size_t cols = x.dim(1);
  auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  std::vector<float> out(idx->size() * cols);
  const float* xs = x.data().data();
  for (std::size_t r = 0; r < idx->size(); ++r) {
    if ((*idx)[r] >= x.dim(0)) {
      shape_error("gather_rows", "row " + std::to_string((*idx)[r]) + " out of range for " + shape_str(x.shape()));
    }
    std::copy_n(xs + (*idx)[r] * cols, cols, out.data() + r * cols);
  }
  return make_result("gather_rows", Shape{idx->size(), cols}, std::move(out), {x},
                     [x, idx, cols](const detail::TensorImpl& o) {
                       auto gx = grad_target(x);
                       if (gx.empty()) return;
                       for (std::size_t r = 0; r < idx->size(); ++r)
                         axpy(gx.data() + (*idx)[r] * cols, 1.0f, o.grad.data() + r * cols, cols);
                     });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    shape_error("cross_entropy", "logits " + shape_str(logits.shape()) + " do not match " +
                                     std::to_string(targets.size()) + " targets");
  }
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  if (n == 0) shape_error("cross_entropy", "no rows");
  auto probs = std::make_shared<std::vector<float>>(n * k);
  auto tg = std::make_shared<std::vector<std::size_t>>(targets.begin(), targets.end());
  const float* ls = logits.data().data();
  float total = 0.0f;
  for (std::size_t r = 0; r < n; ++r) {
    if ((*tg)[r] >= k) shape_error("cross_entropy", "target " + std::to_string((*tg)[r]) + " out of range");
    const float* row = ls + r * k;
    const float mx = *std::max_element(row, row + k);
    float z = 0.0f;
    for (std::size_t c = 0; c < k; ++c) {
      const float e = std::exp(row[c] - mx);
      (*probs)[r * k + c] = e;
      z += e;
    }
    for (std::size_t c = 0; c < k; ++c) (*probs)[r * k + c] /= z;
    total += std::log(z) + mx - row[(*tg)[r]];
  }
  return make_result("cross_entropy", Shape{1}, {total / static_cast<float>(n)}, {logits},
                     [logits, probs, tg, n, k](const detail::TensorImpl& o) {
                       auto gl = grad_target(logits);
                       if (gl.empty()) return;
                       const float s = o.grad[0] / static_cast<float>(n);
                       for (std::size_t r = 0; r < n; ++r) {
                         for (std::size_t c = 0; c < k; ++c) {
                           const float onehot = c == (*tg)[r] ? 1.0f : 0.0f;
                           gl[r * k + c] += s * ((*probs)[r * k + c] - onehot);
                         }
                       }
                     });
}

Tensor depthwise_causal_conv1d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.rank() != 3 || w.rank() != 2 || w.dim(0) != x.dim(2) || bias.numel() != x.dim(2)) {
    shape_error("depthwise_causal_conv1d", "input " + shape_str(x.shape()) + ", kernel " +
                                               shape_str(w.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t seqs = x.dim(0);
  const std::size_t len = x.dim(1);
  const std::size_t ch = x.dim(2);
  const std::size_t k = w.dim(1);
  const float* xs = x.data().data();
  const float* ws = w.data().data();
  const float* bs = bias.data().data();
  std::vector<float> out(x.numel());
  for (std::size_t s = 0; s < seqs; ++s) {
    for (std::size_t t = 0; t < len; ++t) {
      float* o = out.data() + (s * len + t) * ch;
      std::copy_n(bs, ch, o);
      for (std::size_t j = 0; j < k; ++j) {
        if (t + j + 1 < k) continue;
        const float* xi = xs + (s * len + t + j + 1 - k) * ch;
        for (std::size_t e = 0; e < ch; ++e) o[e] += ws[e * k + j] * xi[e];
      }
    }
  }
  return make_result("depthwise_causal_conv1d", x.shape(), std::move(out), {x, w, bias},
                     [x, w, bias, seqs, len, ch, k](const detail::TensorImpl& o) {
                       const float* g = o.grad.data();
                       auto gx = grad_target(x);
                       auto gw = grad_target(w);
                       auto gb = grad_target(bias);
                       const float* xs = x.data().data();
                       const float* ws = w.data().data();
                       for (std::size_t s = 0; s < seqs; ++s) {
                         for (std::size_t t = 0; t < len; ++t) {
                           const float* go = g + (s * len + t) * ch;
                           if (!gb.empty()) axpy(gb.data(), 1.0f, go, ch);
                           for (std::size_t j = 0; j < k; ++j) {
                             if (t + j + 1 < k) continue;
                             const std::size_t src = (s * len + t + j + 1 - k) * ch;
                             for (std::size_t e = 0; e < ch; ++e) {
                               if (!gx.empty()) gx[src + e] += ws[e * k + j] * go[e];
                               if (!gw.empty()) gw[e * k + j] += xs[src + e] * go[e];
                             }
                           }
                         }
                       }
                     });
}

}  // namespace mhsi::ops
