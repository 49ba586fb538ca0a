#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "error.hpp"
#include "ops.hpp"

namespace mhsi {

const char* block_kind_name(BlockKind kind) { return kind == BlockKind::kMamba ? "mamba" : "attention"; }

BlockKind parse_block_kind(const std::string& name) {
  if (name == "mamba") return BlockKind::kMamba;
  if (name == "attention" || name == "self_attention") return BlockKind::kAttention;
  fail(ErrorCode::kUsage, "unknown bench variant '" + name + "' (mamba, attention)");
}

double flops_mamba_layer(std::size_t seqs, std::size_t length, const MambaDims& dims) {
  const double t = static_cast<double>(seqs) * static_cast<double>(length);
  const double d = static_cast<double>(dims.model_width);
  const double e = static_cast<double>(dims.inner_width());
  const double n = static_cast<double>(dims.state_size);
  const double r = static_cast<double>(dims.dt_rank());
  const double k = static_cast<double>(dims.conv_width);
  double macs = d * 2 * e         // in_proj
                + e * k           // depthwise conv
                + e * (r + 2 * n) // x_proj
                + r * e           // dt_proj
                + e * d;          // out_proj
  double flops = 2 * macs;
  flops += e * (1 + 4)      // conv bias, SiLU
           + e * (1 + 4)    // dt bias, softplus
           + e * n * 11     // delta*a, exp, delta*b*u, h update, C.h
           + e * 2          // skip
           + e * (4 + 1);   // gate SiLU and product
  return t * flops;
}

double flops_attention_layer(std::size_t seqs, std::size_t length, std::size_t width) {
  const double s = static_cast<double>(seqs);
  const double l = static_cast<double>(length);
  const double d = static_cast<double>(width);
  const double proj = s * l * 4 * d * d * 2;  // q, k, v, out
  const double scores = s * l * l * d * 2;
  const double softmax = s * l * l * (4 + 1);  // exp plus scaling
  const double mix = s * l * l * d * 2;
  return proj + scores + softmax + mix;
}

double flops_group_norm(std::size_t elements) { return 8.0 * static_cast<double>(elements); }

BlockFlops flops_breakdown(std::size_t height, std::size_t width, const ModelConfig& cfg, BlockKind kind) {
  if (cfg.spectral_groups == 0 || cfg.embed_dim % cfg.spectral_groups != 0) {
    fail(ErrorCode::kUsage, "flops: embed_dim must be divisible by spectral_groups");
  }
  const std::size_t px = height * width;
  const std::size_t d = cfg.embed_dim;
  const std::size_t m = cfg.group_width();
  const double post = flops_group_norm(px * d) + 5.0 * static_cast<double>(px * d);  // GN, SiLU, residual
  BlockFlops f;
  if (kind == BlockKind::kMamba) {
    f.spamb = flops_mamba_layer(1, px, MambaDims{d, cfg.expand, cfg.state_size, cfg.conv_width});
    f.spemb = flops_mamba_layer(px, cfg.spectral_groups, MambaDims{m, cfg.expand, cfg.state_size, cfg.conv_width});
  } else {
    f.spamb = flops_attention_layer(1, px, d);
    f.spemb = flops_attention_layer(px, cfg.spectral_groups, m);
  }
  f.spamb += post;
  f.spemb += post;
  f.fusion = 4.0 * static_cast<double>(px * d);
  return f;
}

double flops_encoder_block(std::size_t height, std::size_t width, const ModelConfig& cfg, BlockKind kind) {
  return flops_breakdown(height, width, cfg, kind).total() * 1e-9;
}

AttentionLayer::AttentionLayer(std::size_t width)
    : wq(Tensor::zeros({width, width})),
      wk(Tensor::zeros({width, width})),
      wv(Tensor::zeros({width, width})),
      wo(Tensor::zeros({width, width})) {}

void AttentionLayer::initialize(Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(std::max<std::size_t>(1, wq.dim(0))));
  for (Tensor* w : {&wq, &wk, &wv, &wo}) fill_uniform(*w, rng, bound);
}

Tensor AttentionLayer::forward(const Tensor& x) const {
  NoGradGuard guard;
  const std::size_t s = x.dim(0), l = x.dim(1), d = x.dim(2);
  if (d != wq.dim(0)) fail(ErrorCode::kShape, "attention: width mismatch " + shape_str(x.shape()));
  Tensor q = ops::linear(x, wq);
  Tensor k = ops::linear(x, wk);
  Tensor v = ops::linear(x, wv);
  std::vector<float> mixed(s * l * d, 0.0f);
  const float inv = 1.0f / std::sqrt(static_cast<float>(d));
  constexpr std::size_t kChunk = 64;
  std::vector<float> scores(kChunk * l);
  const float* qd = q.data().data();
  const float* kd = k.data().data();
  const float* vd = v.data().data();
  for (std::size_t seq = 0; seq < s; ++seq) {
    const float* qs = qd + seq * l * d;
    const float* ks = kd + seq * l * d;
    const float* vs = vd + seq * l * d;
    float* out = mixed.data() + seq * l * d;
    for (std::size_t r0 = 0; r0 < l; r0 += kChunk) {
      const std::size_t rows = std::min(kChunk, l - r0);
      for (std::size_t i = 0; i < rows; ++i) {
        const float* qi = qs + (r0 + i) * d;
        float* si = scores.data() + i * l;
        float mx = -INFINITY;
        for (std::size_t j = 0; j < l; ++j) {
          const float* kj = ks + j * d;
          float acc = 0.0f;
          for (std::size_t c = 0; c < d; ++c) acc += qi[c] * kj[c];
          si[j] = acc * inv;
          mx = std::max(mx, si[j]);
        }
        float total = 0.0f;
        for (std::size_t j = 0; j < l; ++j) {
          si[j] = std::exp(si[j] - mx);
          total += si[j];
        }
        const float norm = 1.0f / total;
        float* oi = out + (r0 + i) * d;
        for (std::size_t j = 0; j < l; ++j) {
          const float p = si[j] * norm;
          const float* vj = vs + j * d;
          for (std::size_t c = 0; c < d; ++c) oi[c] += p * vj[c];
        }
      }
    }
  }
  return ops::linear(Tensor::from({s, l, d}, std::move(mixed)), wo);
}

namespace {

struct BenchBlock {
  ModelConfig cfg;
  EncoderBlock block;
  AttentionLayer spa_attn;
  AttentionLayer spe_attn;
};

Tensor post_process(const Tensor& r, const Tensor& h, const ModelConfig& cfg, const Tensor& gamma,
                    const Tensor& beta) {
  return ops::add(ops::silu(ops::group_norm(ops::reshape(r, h.shape()), cfg.gn_groups, gamma, beta)), h);
}

Tensor attention_block_forward(const BenchBlock& b, const Tensor& h) {
  const auto& cfg = b.cfg;
  const std::size_t px = h.dim(1) * h.dim(2);
  Tensor spa = post_process(b.spa_attn.forward(ops::reshape(h, {1, px, cfg.embed_dim})), h, cfg,
                            b.block.spatial_gn_gamma, b.block.spatial_gn_beta);
  Tensor spe = post_process(b.spe_attn.forward(ops::reshape(h, {px, cfg.spectral_groups, cfg.group_width()})), h,
                            cfg, b.block.spectral_gn_gamma, b.block.spectral_gn_beta);
  return ssfm_fuse(h, spa, spe, b.block.fusion);
}

}  // namespace

std::vector<BenchRow> bench_forward(std::span<const std::size_t> sides, const ModelConfig& cfg, BlockKind kind,
                                    std::size_t repeats, std::size_t attention_cap) {
  if (sides.empty()) fail(ErrorCode::kUsage, "bench: no sizes given");
  if (repeats == 0) fail(ErrorCode::kUsage, "bench: repeats must be >= 1");
  ModelConfig c = cfg;
  c.encoder_depth = 1;
  c.variant = EncoderVariant::kFull;
  // The embedding and head are not timed; any valid extents will do.
  c.spectral_channels = std::max<std::uint32_t>(c.spectral_channels, 1);
  c.class_count = std::max<std::uint32_t>(c.class_count, 2);
  MambaHsi model(c);
  Rng rng(c.seed);
  BenchBlock b{c, model.blocks().front(), AttentionLayer(c.embed_dim), AttentionLayer(c.group_width())};
  b.spa_attn.initialize(rng);
  b.spe_attn.initialize(rng);

  std::vector<BenchRow> rows;
  for (std::size_t side : sides) {
    if (side == 0) fail(ErrorCode::kUsage, "bench: size must be >= 1");
    BenchRow row{kind, side, side, flops_encoder_block(side, side, c, kind), std::nullopt};
    if (kind == BlockKind::kAttention && side > attention_cap) {
      rows.push_back(row);
      continue;
    }
    Tensor h = Tensor::zeros({1, side, side, c.embed_dim});
    for (auto& v : h.mutable_data()) v = static_cast<float>(rng.normal());
    NoGradGuard guard;
    std::vector<double> times;
    for (std::size_t i = 0; i < repeats; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      Tensor out = kind == BlockKind::kMamba ? encoder_forward(std::span(&b.block, 1), h, c)
                                             : attention_block_forward(b, h);
      const auto t1 = std::chrono::steady_clock::now();
      if (out.numel() != h.numel()) fail(ErrorCode::kInternal, "bench: output shape changed");
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    row.seconds = times[times.size() / 2];
    rows.push_back(row);
  }
  return rows;
}

std::string bench_csv(std::span<const BenchRow> rows) {
  std::string out = "variant,H,W,L,gflops_model,seconds\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.6f,", block_kind_name(r.kind), r.height, r.width, r.length(),
                  r.gflops_model);
    out += buf;
    if (r.seconds) {
      std::snprintf(buf, sizeof buf, "%.6f\n", *r.seconds);
      out += buf;
    } else {
      out += "skipped\n";
    }
  }
  return out;
}

}  // namespace mhsi
