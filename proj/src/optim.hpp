#pragma once

#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace mhsi {

struct AdamOptions {
  float lr = 3e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Moment buffers are created lazily on the first step, one per parameter in
// the order the parameters are passed.
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::int64_t step_count = 0;
};

// One bias-corrected Adam update. Every parameter must hold a gradient; grads
// are left in place for the caller to zero.
void adam_step(std::vector<NamedTensor>& params, AdamState& state);

}  // namespace mhsi
