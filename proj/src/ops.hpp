#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tensor.hpp"

// Differentiable tensor operations. Layouts are channel-last throughout: a
// feature map is [batch, H, W, channels] and a token sequence is
// [sequences, length, channels].
//
// Reductions accumulate in float32 in ascending flat-index order, so results
// are bit-identical run to run.
namespace mhsi::ops {

// [M, K] x [K, N] -> [M, N].
Tensor matmul(const Tensor& a, const Tensor& b);
// Applies w [in, out] (and optional bias [out]) along the last axis.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = {});
// 1x1 convolution over the channel axis of a channel-last map; same as linear.
inline Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& bias = {}) {
  return linear(x, w, bias);
}

// Elementwise binary ops. The smaller operand broadcasts when its shape equals
// a trailing suffix of the other's shape, or when it holds a single element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, float c);
Tensor scale(const Tensor& x, float c);

Tensor exp(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);

Tensor softmax(const Tensor& x, std::size_t axis);

// Group normalization of a channel-last tensor [B, ..., C]. Statistics are
// taken per (batch entry, channel group) over every position and every
// channel of the group; gamma/beta are per channel [C].
Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);

Tensor reshape(const Tensor& x, Shape shape);
// Collapses axes [start, rank) into one.
Tensor flatten(const Tensor& x, std::size_t start_axis = 0);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// Full reductions return shape [1].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Reduction over one axis; the axis is removed.
Tensor sum_axis(const Tensor& x, std::size_t axis);

// Selects rows of a rank-2 tensor.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

// Mean over rows of -log softmax(logits[r])[targets[r]]; targets are 0-based.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

// Causal depthwise convolution along the length axis of [S, L, E] with
// kernel w [E, k] and bias [E]: y[t] = b + sum_j w[j] * x[t - (k-1) + j].
Tensor depthwise_causal_conv1d(const Tensor& x, const Tensor& w, const Tensor& bias);

}  // namespace mhsi::ops
