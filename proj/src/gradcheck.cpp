#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"

namespace mhsi {

double finite_diff_check(const std::function<Tensor()>& f, Tensor x, float step) {
  if (!x.requires_grad()) fail(ErrorCode::kUsage, "finite_diff_check: input must require grad");
  x.zero_grad();
  Tensor loss = f();
  backward(loss);
  std::vector<float> analytic(x.numel(), 0.0f);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

  NoGradGuard no_grad;
  double worst = 0.0;
  auto values = x.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float saved = values[i];
    const float hi = saved + step;
    const float lo = saved - step;
    values[i] = hi;
    const double up = f().item();
    values[i] = lo;
    const double down = f().item();
    values[i] = saved;
    // Divide by the representable spacing, not 2*step.
    const double numeric = (up - down) / (static_cast<double>(hi) - static_cast<double>(lo));
    const double err = std::abs(static_cast<double>(analytic[i]) - numeric) / (std::abs(numeric) + 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace mhsi
