#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rng.hpp"
#include "ssm.hpp"
#include "tensor.hpp"

namespace mhsi {

struct MambaDims {
  std::size_t model_width = 0;  // D
  std::size_t expand = 2;
  std::size_t state_size = 16;  // N
  std::size_t conv_width = 4;   // k

  std::size_t inner_width() const { return expand * model_width; }
  // max(1, D / 16)
  std::size_t dt_rank() const { return model_width < 32 ? 1 : model_width / 16; }
};

// The standard Mamba layer on [S, L, D] token sequences:
//   x, z   = split(x W_in)                      width E = expand * D each
//   x      = SiLU(causal depthwise conv_k(x))
//   dt,B,C = split(x W_x)                       widths R, N, N
//   delta  = softplus(dt W_dt + b_dt)
//   y      = selective_scan(x, delta, A = -exp(A_log), B, C, D_skip)
//   out    = (y * SiLU(z)) W_out
// No residual is added here.
class MambaLayer {
 public:
  MambaLayer() = default;
  explicit MambaLayer(MambaDims dims);

  // Mamba's reference initialization: A_n = -(n + 1), D_skip = 1, delta bias
  // set so softplus(bias) is log-uniform in [1e-3, 1e-1], uniform fan-in
  // bounds elsewhere.
  void initialize(Rng& rng);

  Tensor forward(const Tensor& x, ScanMode mode = ScanMode::kSequential) const;

  const MambaDims& dims() const { return dims_; }
  std::vector<NamedTensor> parameters(const std::string& prefix) const;

  Tensor in_proj;     // [D, 2E]
  Tensor conv_w;      // [E, k]
  Tensor conv_b;      // [E]
  Tensor x_proj;      // [E, R + 2N]
  Tensor dt_proj_w;   // [R, E]
  Tensor dt_proj_b;   // [E]
  Tensor a_log;       // [E, N]
  Tensor d_skip;      // [E]
  Tensor out_proj;    // [E, D]

 private:
  MambaDims dims_;
};

void fill_uniform(Tensor& t, Rng& rng, float bound);

}  // namespace mhsi
