#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tensor.hpp"

namespace mhsi {

enum class ScanMode { kSequential, kParallelPrefix };

// Continuous single-input single-output SSM h' = A h + B x, y = C h with a
// diagonal state matrix stored as its N diagonal entries. delta is the
// discretization timescale.
struct LtiSsm {
  std::vector<float> a;
  std::vector<float> b;
  std::vector<float> c;
  float delta = 1.0f;
};

// Discretized SSM. With steps == 0 the parameters are time-invariant and each
// vector holds N entries; otherwise each holds steps * N entries, row t
// belonging to token t.
struct DiscreteSsm {
  std::size_t state_size = 0;
  std::size_t steps = 0;
  std::vector<float> a_bar;
  std::vector<float> b_bar;
  std::vector<float> c;

  bool time_varying() const { return steps != 0; }
};

struct DiscretePair {
  float a_bar;
  float b_bar;
};

// Exact zero-order hold for one diagonal entry:
// a_bar = exp(delta a), b_bar = (exp(delta a) - 1) / a * b.
DiscretePair zoh_scalar(float a, float b, float delta);
// Selective-mode rule: a_bar = exp(delta a), b_bar = delta b.
DiscretePair euler_scalar(float a, float b, float delta);

DiscreteSsm zoh_discretize(const LtiSsm& ssm);
// Per-token discretization of an input-dependent SSM: a [N], delta [L],
// b and c [L, N]. Uses the selective-mode rule.
DiscreteSsm discretize_selective(std::span<const float> a, std::span<const float> delta,
                                 std::span<const float> b, std::span<const float> c);

// y_t = C_t h_t with h_t = A_t h_{t-1} + B_t x_t. h0 empty means zero state.
std::vector<float> scan_recurrent(const DiscreteSsm& ssm, std::span<const float> x,
                                  std::span<const float> h0 = {});
// K = (C B, C A B, ..., C A^{L-1} B). Time-invariant only.
std::vector<float> ssm_kernel(const DiscreteSsm& ssm, std::size_t length);
// Causal convolution of x with ssm_kernel. Time-invariant only.
std::vector<float> scan_convolutional(const DiscreteSsm& ssm, std::span<const float> x);

// Selective scan over a batch of sequences.
//   u, delta: [S, L, E]   a: [E, N] (negative)   b, c: [S, L, N]   d: [E]
// For each sequence and channel independently:
//   h_t = exp(delta_t a) h_{t-1} + delta_t b_t u_t,  y_t = c_t . h_t + d u_t.
struct SelectiveScanArgs {
  std::size_t seqs = 0;
  std::size_t length = 0;
  std::size_t channels = 0;
  std::size_t state = 0;
  std::span<const float> u;
  std::span<const float> delta;
  std::span<const float> a;
  std::span<const float> b;
  std::span<const float> c;
  std::span<const float> d;
};

// Writes y [S, L, E]. When `states` is non-empty it receives every hidden
// state, laid out [S, L, E, N]. ParallelPrefix evaluates the recurrence with
// a balanced-tree (up-sweep/down-sweep) scan over the associative operator
// (a, b) o (a', b') = (a a', a' b + b'); its combination order is fixed.
void selective_scan_raw(const SelectiveScanArgs& args, ScanMode mode, std::span<float> y,
                        std::span<float> states = {});

// Differentiable selective scan; tensor shapes as in SelectiveScanArgs. The
// backward pass is shared by both modes and runs in reverse time over the
// stored states.
Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& a, const Tensor& b,
                      const Tensor& c, const Tensor& d, ScanMode mode);

}  // namespace mhsi
