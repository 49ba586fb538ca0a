#include "ssm.hpp"

#include <cmath>
#include <string>

#include "error.hpp"

namespace mhsi {

namespace {

void check_delta(float delta) {
  if (!(delta > 0.0f) || !std::isfinite(delta)) {
    fail(ErrorCode::kUsage, "discretize: timescale delta must be positive and finite, got " + std::to_string(delta));
  }
}

void check_finite(float v, std::size_t seq, std::size_t pos, std::size_t channel) {
  if (!std::isfinite(v)) {
    fail(ErrorCode::kNumeric, "selective_scan: non-finite activation at sequence " + std::to_string(seq) +
                                  ", position " + std::to_string(pos) + ", channel " + std::to_string(channel));
  }
}

struct Affine {
  float a;
  float b;
};

// `earlier` applied first, then `later`.
Affine combine(Affine earlier, Affine later) { return {earlier.a * later.a, later.a * earlier.b + later.b}; }

// Inclusive scan in place; `tree` must have power-of-two size >= values.size().
void tree_scan(std::vector<Affine>& values, std::vector<Affine>& tree) {
  const std::size_t n = values.size();
  const std::size_t p = tree.size();
  for (std::size_t i = 0; i < p; ++i) tree[i] = i < n ? values[i] : Affine{1.0f, 0.0f};
  for (std::size_t stride = 1; stride < p; stride *= 2) {
    for (std::size_t i = 2 * stride - 1; i < p; i += 2 * stride) tree[i] = combine(tree[i - stride], tree[i]);
  }
  tree[p - 1] = {1.0f, 0.0f};
  for (std::size_t stride = p / 2; stride >= 1; stride /= 2) {
    for (std::size_t i = 2 * stride - 1; i < p; i += 2 * stride) {
      const Affine left = tree[i - stride];
      tree[i - stride] = tree[i];
      tree[i] = combine(tree[i], left);
    }
  }
  // tree now holds exclusive prefixes.
  for (std::size_t i = 0; i < n; ++i) values[i] = combine(tree[i], values[i]);
}

}  // namespace

DiscretePair zoh_scalar(float a, float b, float delta) {
  check_delta(delta);
  const float z = delta * a;
  const float a_bar = std::exp(z);
  // (exp(z) - 1) / z * delta b, with the z -> 0 limit delta b.
  const float factor = z == 0.0f ? 1.0f : std::expm1(z) / z;
  return {a_bar, factor * delta * b};
}

DiscretePair euler_scalar(float a, float b, float delta) {
  check_delta(delta);
  return {std::exp(delta * a), delta * b};
}

DiscreteSsm zoh_discretize(const LtiSsm& ssm) {
  const std::size_t n = ssm.a.size();
  if (ssm.b.size() != n || ssm.c.size() != n) {
    fail(ErrorCode::kShape, "zoh_discretize: A, B, C sizes differ");
  }
  DiscreteSsm out;
  out.state_size = n;
  out.a_bar.resize(n);
  out.b_bar.resize(n);
  out.c = ssm.c;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = zoh_scalar(ssm.a[i], ssm.b[i], ssm.delta);
    out.a_bar[i] = p.a_bar;
    out.b_bar[i] = p.b_bar;
  }
  return out;
}

DiscreteSsm discretize_selective(std::span<const float> a, std::span<const float> delta,
                                 std::span<const float> b, std::span<const float> c) {
  const std::size_t n = a.size();
  const std::size_t steps = delta.size();
  if (b.size() != steps * n || c.size() != steps * n) {
    fail(ErrorCode::kShape, "discretize_selective: B and C must hold L*N entries");
  }
  DiscreteSsm out;
  out.state_size = n;
  out.steps = steps;
  out.a_bar.resize(steps * n);
  out.b_bar.resize(steps * n);
  out.c.assign(c.begin(), c.end());
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = euler_scalar(a[i], b[t * n + i], delta[t]);
      out.a_bar[t * n + i] = p.a_bar;
      out.b_bar[t * n + i] = p.b_bar;
    }
  }
  return out;
}

std::vector<float> scan_recurrent(const DiscreteSsm& ssm, std::span<const float> x, std::span<const float> h0) {
  const std::size_t n = ssm.state_size;
  if (ssm.time_varying() && ssm.steps != x.size()) {
    fail(ErrorCode::kShape, "scan_recurrent: " + std::to_string(ssm.steps) + " parameter steps for " +
                                std::to_string(x.size()) + " inputs");
  }
  if (!h0.empty() && h0.size() != n) fail(ErrorCode::kShape, "scan_recurrent: initial state size mismatch");
  std::vector<float> h(n, 0.0f);
  if (!h0.empty()) h.assign(h0.begin(), h0.end());
  std::vector<float> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const std::size_t row = ssm.time_varying() ? t * n : 0;
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = ssm.a_bar[row + i] * h[i] + ssm.b_bar[row + i] * x[t];
      acc += ssm.c[row + i] * h[i];
    }
    y[t] = acc;
  }
  return y;
}

std::vector<float> ssm_kernel(const DiscreteSsm& ssm, std::size_t length) {
  if (ssm.time_varying()) fail(ErrorCode::kUsage, "ssm_kernel: requires time-invariant parameters");
  const std::size_t n = ssm.state_size;
  std::vector<float> k(length);
  std::vector<float> power(n, 1.0f);  // A^j entries
  for (std::size_t j = 0; j < length; ++j) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
      acc += ssm.c[i] * power[i] * ssm.b_bar[i];
      power[i] *= ssm.a_bar[i];
    }
    k[j] = acc;
  }
  return k;
}

std::vector<float> scan_convolutional(const DiscreteSsm& ssm, std::span<const float> x) {
  if (ssm.time_varying()) {
    fail(ErrorCode::kUsage, "scan_convolutional: per-token (selective) parameters have no convolution kernel");
  }
  const auto k = ssm_kernel(ssm, x.size());
  std::vector<float> y(x.size(), 0.0f);
  for (std::size_t t = 0; t < x.size(); ++t) {
    float acc = 0.0f;
    for (std::size_t j = 0; j <= t; ++j) acc += k[j] * x[t - j];
    y[t] = acc;
  }
  return y;
}

void selective_scan_raw(const SelectiveScanArgs& args, ScanMode mode, std::span<float> y, std::span<float> states) {
  const std::size_t S = args.seqs, L = args.length, E = args.channels, N = args.state;
  if (args.u.size() != S * L * E || args.delta.size() != S * L * E || args.a.size() != E * N ||
      args.b.size() != S * L * N || args.c.size() != S * L * N || args.d.size() != E || y.size() != S * L * E) {
    fail(ErrorCode::kShape, "selective_scan: argument sizes inconsistent with S=" + std::to_string(S) +
                                " L=" + std::to_string(L) + " E=" + std::to_string(E) + " N=" + std::to_string(N));
  }
  const bool keep = !states.empty();
  if (keep && states.size() != S * L * E * N) fail(ErrorCode::kShape, "selective_scan: state buffer size mismatch");
  const bool trap = nonfinite_trap_enabled();

  std::vector<float> h(N);
  std::size_t tree_size = 1;
  while (tree_size < L) tree_size *= 2;
  std::vector<Affine> seq;
  std::vector<Affine> tree;
  std::vector<float> hs;  // [L, N] for the current channel in prefix mode
  if (mode == ScanMode::kParallelPrefix) {
    seq.resize(L);
    tree.resize(tree_size);
    hs.resize(L * N);
  }

  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t e = 0; e < E; ++e) {
      const float* ae = args.a.data() + e * N;
      const float de = args.d[e];
      if (mode == ScanMode::kSequential) {
        std::fill(h.begin(), h.end(), 0.0f);
        for (std::size_t t = 0; t < L; ++t) {
          const std::size_t tok = s * L + t;
          const float dt = args.delta[tok * E + e];
          const float ut = args.u[tok * E + e];
          const float* bt = args.b.data() + tok * N;
          const float* ct = args.c.data() + tok * N;
          float acc = 0.0f;
          for (std::size_t n = 0; n < N; ++n) {
            h[n] = std::exp(dt * ae[n]) * h[n] + dt * bt[n] * ut;
            acc += ct[n] * h[n];
          }
          if (keep) std::copy(h.begin(), h.end(), states.begin() + static_cast<std::ptrdiff_t>((tok * E + e) * N));
          y[tok * E + e] = acc + de * ut;
          if (trap) check_finite(y[tok * E + e], s, t, e);
        }
      } else {
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t t = 0; t < L; ++t) {
            const std::size_t tok = s * L + t;
            const float dt = args.delta[tok * E + e];
            seq[t] = {std::exp(dt * ae[n]), dt * args.b[tok * N + n] * args.u[tok * E + e]};
          }
          tree_scan(seq, tree);
          for (std::size_t t = 0; t < L; ++t) hs[t * N + n] = seq[t].b;
        }
        for (std::size_t t = 0; t < L; ++t) {
          const std::size_t tok = s * L + t;
          const float* ct = args.c.data() + tok * N;
          float acc = 0.0f;
          for (std::size_t n = 0; n < N; ++n) acc += ct[n] * hs[t * N + n];
          if (keep) std::copy_n(hs.begin() + static_cast<std::ptrdiff_t>(t * N), N, states.begin() + static_cast<std::ptrdiff_t>((tok * E + e) * N));
          y[tok * E + e] = acc + de * args.u[tok * E + e];
          if (trap) check_finite(y[tok * E + e], s, t, e);
        }
      }
    }
  }
}

Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& a, const Tensor& b, const Tensor& c,
                      const Tensor& d, ScanMode mode) {
  if (u.rank() != 3 || delta.shape() != u.shape() || a.rank() != 2 || b.rank() != 3 || c.shape() != b.shape() ||
      d.rank() != 1 || a.dim(0) != u.dim(2) || d.dim(0) != u.dim(2) || b.dim(0) != u.dim(0) || b.dim(1) != u.dim(1) ||
      b.dim(2) != a.dim(1)) {
    fail(ErrorCode::kShape, "selective_scan: shapes u" + shape_str(u.shape()) + " delta" + shape_str(delta.shape()) +
                                " A" + shape_str(a.shape()) + " B" + shape_str(b.shape()) + " C" +
                                shape_str(c.shape()) + " D" + shape_str(d.shape()) + " are inconsistent");
  }
  SelectiveScanArgs args;
  args.seqs = u.dim(0);
  args.length = u.dim(1);
  args.channels = u.dim(2);
  args.state = a.dim(1);
  args.u = u.data();
  args.delta = delta.data();
  args.a = a.data();
  args.b = b.data();
  args.c = c.data();
  args.d = d.data();

  const bool needs_graph = grad_enabled() && (u.requires_grad() || delta.requires_grad() || a.requires_grad() ||
                                              b.requires_grad() || c.requires_grad() || d.requires_grad());
  std::vector<float> y(u.numel());
  auto states = std::make_shared<std::vector<float>>();
  if (needs_graph) states->resize(u.numel() * args.state);
  selective_scan_raw(args, mode, y, *states);

  return make_result(
      "selective_scan", u.shape(), std::move(y), {u, delta, a, b, c, d},
      [u, delta, a, b, c, d, states, args](const detail::TensorImpl& out) {
        const std::size_t S = args.seqs, L = args.length, E = args.channels, N = args.state;
        const float* gy = out.grad.data();
        const float* us = u.data().data();
        const float* ds = delta.data().data();
        const float* as = a.data().data();
        const float* bs = b.data().data();
        const float* cs = c.data().data();
        const float* dskip = d.data().data();
        const float* hs = states->data();
        auto gu = grad_target(u);
        auto gdelta = grad_target(delta);
        auto ga = grad_target(a);
        auto gb = grad_target(b);
        auto gc = grad_target(c);
        auto gd = grad_target(d);
        std::vector<float> dh(N);
        for (std::size_t s = 0; s < S; ++s) {
          for (std::size_t e = 0; e < E; ++e) {
            std::fill(dh.begin(), dh.end(), 0.0f);
            const float* ae = as + e * N;
            for (std::size_t t = L; t-- > 0;) {
              const std::size_t tok = s * L + t;
              const float dt = ds[tok * E + e];
              const float ut = us[tok * E + e];
              const float gyt = gy[tok * E + e];
              const float* ht = hs + (tok * E + e) * N;
              const float* hprev = t > 0 ? hs + ((tok - 1) * E + e) * N : nullptr;
              const float* bt = bs + tok * N;
              const float* ct = cs + tok * N;
              float gu_acc = gyt * dskip[e];
              float gdelta_acc = 0.0f;
              if (!gd.empty()) gd[e] += gyt * ut;
              for (std::size_t n = 0; n < N; ++n) {
                const float hp = hprev != nullptr ? hprev[n] : 0.0f;
                if (!gc.empty()) gc[tok * N + n] += gyt * ht[n];
                const float dhn = dh[n] + gyt * ct[n];
                const float decay = std::exp(dt * ae[n]);
                gdelta_acc += dhn * (hp * decay * ae[n] + bt[n] * ut);
                if (!ga.empty()) ga[e * N + n] += dhn * hp * decay * dt;
                if (!gb.empty()) gb[tok * N + n] += dhn * dt * ut;
                gu_acc += dhn * dt * bt[n];
                dh[n] = dhn * decay;
              }
              if (!gu.empty()) gu[tok * E + e] += gu_acc;
              if (!gdelta.empty()) gdelta[tok * E + e] += gdelta_acc;
            }
          }
        }
      });
}

}  // namespace mhsi
