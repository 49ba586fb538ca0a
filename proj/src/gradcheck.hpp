#pragma once

#include <functional>

#include "tensor.hpp"

namespace mhsi {

// Compares the reverse-mode gradient of a scalar function against central
// differences, perturbing each entry of `x` in place by +-step. Returns
// max_i |analytic_i - numeric_i| / (|numeric_i| + 1e-8).
// `x` must require grad; its grad buffer is overwritten.
double finite_diff_check(const std::function<Tensor()>& f, Tensor x, float step);

}  // namespace mhsi
