#include "optim.hpp"

#include <cmath>

#include "error.hpp"

namespace mhsi {

void adam_step(std::vector<NamedTensor>& params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.tensor.numel(), 0.0f);
      state.second_moment.emplace_back(p.tensor.numel(), 0.0f);
    }
  }
  if (state.first_moment.size() != params.size()) {
    fail(ErrorCode::kUsage, "adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].tensor.has_grad()) fail(ErrorCode::kUsage, "adam_step: parameter '" + params[k].name + "' has no gradient");
    if (state.first_moment[k].size() != params[k].tensor.numel()) {
      fail(ErrorCode::kUsage, "adam_step: moment buffers misaligned for '" + params[k].name + "'");
    }
  }

  const auto& o = state.options;
  ++state.step_count;
  const auto t = static_cast<double>(state.step_count);
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(o.beta1), t));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(o.beta2), t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].tensor.mutable_data();
    auto g = params[k].tensor.grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0f - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0f - o.beta2) * g[i] * g[i];
      const float mhat = m[i] / c1;
      const float vhat = v[i] / c2;
      w[i] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
    }
  }
}

}  // namespace mhsi
