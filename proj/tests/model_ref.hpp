#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mamba_ref.hpp"
#include "model.hpp"

namespace mhsi::testing {

using Vec = std::vector<double>;

inline double silu_ref(double v) { return v / (1.0 + std::exp(-v)); }

// Channel-last group norm over [batch, positions, channels].
inline Vec group_norm_ref(const Vec& x, std::size_t batch, std::size_t positions, std::size_t channels,
                          std::size_t groups, const Vec& gamma, const Vec& beta, double eps = 1e-5) {
  Vec out(x.size());
  const std::size_t cg = channels / groups;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t g = 0; g < groups; ++g) {
      double mean = 0.0, var = 0.0;
      const double n = static_cast<double>(positions * cg);
      for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t c = g * cg; c < (g + 1) * cg; ++c) mean += x[(b * positions + p) * channels + c];
      mean /= n;
      for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t c = g * cg; c < (g + 1) * cg; ++c) {
          const double d = x[(b * positions + p) * channels + c] - mean;
          var += d * d;
        }
      var /= n;
      const double inv = 1.0 / std::sqrt(var + eps);
      for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t c = g * cg; c < (g + 1) * cg; ++c) {
          const std::size_t i = (b * positions + p) * channels + c;
          out[i] = (x[i] - mean) * inv * gamma[c] + beta[c];
        }
    }
  }
  return out;
}

// x [rows, in] times w [in, out] plus b [out].
inline Vec linear_ref(const Vec& x, std::size_t rows, std::size_t in, const Vec& w, std::size_t out, const Vec* b) {
  Vec y(rows * out, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < out; ++j) {
      double acc = b ? (*b)[j] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += x[r * in + i] * w[i * out + j];
      y[r * out + j] = acc;
    }
  return y;
}

// Mamba -> GN -> SiLU -> + h over `seqs` sequences of `len` tokens of width
// `width`; GN runs over the [1, pixels, D] map. mamba holds the nine layer
// parameters, then gamma, beta.
inline Vec block_ref(const Vec& h, std::size_t pixels, std::size_t d, std::size_t seqs, std::size_t len,
                     const MambaDims& dims, const std::vector<Vec>& p, std::size_t gn_groups) {
  const std::vector<Vec> mamba(p.begin(), p.begin() + 9);
  Vec r = MambaRef{dims, seqs, len}.forward(h, mamba);
  r = group_norm_ref(r, 1, pixels, d, gn_groups, p[9], p[10]);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = silu_ref(r[i]) + h[i];
  return r;
}

inline double weighted(const Vec& y, const Vec& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * w[i];
  return acc;
}

// Worst relative error, per tensor, of the analytic gradients already
// accumulated on `tensors` against central differences (step 1e-6) of the
// float64 `loss`, which reads the same values from `values`.
inline std::vector<double> grad_errors_vs_double(const std::vector<NamedTensor>& tensors, std::vector<Vec>& values,
                                                 const std::function<double()>& loss) {
  std::vector<double> out;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    if (!tensors[k].tensor.has_grad()) {
      out.push_back(INFINITY);
      continue;
    }
    auto g = tensors[k].tensor.grad();
    double worst = 0.0;
    for (std::size_t i = 0; i < values[k].size(); ++i) {
      const double saved = values[k][i];
      values[k][i] = saved + 1e-6;
      const double up = loss();
      values[k][i] = saved - 1e-6;
      const double down = loss();
      values[k][i] = saved;
      const double numeric = (up - down) / 2e-6;
      worst = std::max(worst, std::abs(g[i] - numeric) / (std::abs(numeric) + 1e-8));
    }
    out.push_back(worst);
  }
  return out;
}

}  // namespace mhsi::testing
