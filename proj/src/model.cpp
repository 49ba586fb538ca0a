#include "model.hpp"

#include <cmath>

#include "error.hpp"
#include "ops.hpp"

namespace mhsi {

const char* variant_name(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::kFull:
      return "full";
    case EncoderVariant::kSum:
      return "sum";
    case EncoderVariant::kSpatialOnly:
      return "spatial";
    case EncoderVariant::kSpectralOnly:
      return "spectral";
  }
  return "?";
}

EncoderVariant parse_variant(const std::string& name) {
  for (auto v : {EncoderVariant::kFull, EncoderVariant::kSum, EncoderVariant::kSpatialOnly, EncoderVariant::kSpectralOnly}) {
    if (name == variant_name(v)) return v;
  }
  fail(ErrorCode::kUsage, "unknown encoder variant '" + name + "' (full, sum, spatial, spectral)");
}

const char* scan_mode_name(ScanMode m) { return m == ScanMode::kSequential ? "sequential" : "parallel"; }

ScanMode parse_scan_mode(const std::string& name) {
  if (name == "sequential") return ScanMode::kSequential;
  if (name == "parallel") return ScanMode::kParallelPrefix;
  fail(ErrorCode::kUsage, "unknown scan mode '" + name + "' (sequential, parallel)");
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorCode::kUsage, "config: " + msg);
  };
  require(spectral_channels >= 1, "spectral_channels must be >= 1");
  require(embed_dim >= 1, "embed_dim must be >= 1");
  require(spectral_groups >= 1, "spectral_groups must be >= 1");
  require(embed_dim % spectral_groups == 0, "embed_dim " + std::to_string(embed_dim) +
                                                " is not divisible by spectral_groups " + std::to_string(spectral_groups));
  require(encoder_depth >= 1, "encoder_depth must be >= 1");
  require(class_count >= 2, "class_count must be >= 2");
  require(state_size >= 1 && expand >= 1 && conv_width >= 1, "ssm sizes must be >= 1");
  require(gn_groups >= 1 && embed_dim % gn_groups == 0, "embed_dim must be divisible by gn_groups");
  require(std::isfinite(lr) && lr > 0.0f, "lr must be positive");
  require(static_cast<std::uint8_t>(variant) <= 3, "unknown encoder variant");
}

namespace {

MambaDims dims_for(std::uint32_t width, const ModelConfig& cfg) {
  return MambaDims{width, cfg.expand, cfg.state_size, cfg.conv_width};
}

void check_map(const Tensor& h, const ModelConfig& cfg, const char* who) {
  if (h.rank() != 4 || h.dim(3) != cfg.embed_dim) {
    fail(ErrorCode::kShape, std::string(who) + ": expected [B, H, W, " + std::to_string(cfg.embed_dim) +
                                "] feature map, got " + shape_str(h.shape()));
  }
}

}  // namespace

Tensor spamb_forward(const EncoderBlock& block, const Tensor& h, const ModelConfig& cfg) {
  check_map(h, cfg, "spamb");
  const std::size_t b = h.dim(0);
  Tensor seq = ops::reshape(h, {b, h.dim(1) * h.dim(2), h.dim(3)});
  Tensor r = block.spatial.forward(seq, cfg.scan_mode);
  r = ops::reshape(r, h.shape());
  r = ops::silu(ops::group_norm(r, cfg.gn_groups, block.spatial_gn_gamma, block.spatial_gn_beta));
  return ops::add(r, h);
}

Tensor spemb_forward(const EncoderBlock& block, const Tensor& h, const ModelConfig& cfg) {
  check_map(h, cfg, "spemb");
  if (cfg.embed_dim % cfg.spectral_groups != 0) {
    fail(ErrorCode::kUsage, "spemb: embed_dim not divisible by spectral_groups");
  }
  const std::size_t pixels = h.dim(0) * h.dim(1) * h.dim(2);
  Tensor groups = ops::reshape(h, {pixels, cfg.spectral_groups, cfg.group_width()});
  Tensor r = block.spectral.forward(groups, cfg.scan_mode);
  r = ops::reshape(r, h.shape());
  r = ops::silu(ops::group_norm(r, cfg.gn_groups, block.spectral_gn_gamma, block.spectral_gn_beta));
  return ops::add(r, h);
}

Tensor ssfm_fuse(const Tensor& h_in, const Tensor& h_spa, const Tensor& h_spe, const FusionWeights& w) {
  if (h_spa.shape() != h_in.shape() || h_spe.shape() != h_in.shape()) {
    fail(ErrorCode::kShape, "ssfm: shapes " + shape_str(h_in.shape()) + ", " + shape_str(h_spa.shape()) + ", " +
                                shape_str(h_spe.shape()) + " differ");
  }
  return ops::add(ops::add(h_in, ops::mul(h_spa, w.w_spa)), ops::mul(h_spe, w.w_spe));
}

Tensor encoder_forward(std::span<const EncoderBlock> blocks, const Tensor& e, const ModelConfig& cfg) {
  Tensor h = e;
  for (const auto& block : blocks) {
    switch (cfg.variant) {
      case EncoderVariant::kFull: {
        Tensor spa = spamb_forward(block, h, cfg);
        Tensor spe = spemb_forward(block, h, cfg);
        h = ssfm_fuse(h, spa, spe, block.fusion);
        break;
      }
      case EncoderVariant::kSum:
        h = ops::add(spamb_forward(block, h, cfg), spemb_forward(block, h, cfg));
        break;
      case EncoderVariant::kSpatialOnly:
        h = spamb_forward(block, h, cfg);
        break;
      case EncoderVariant::kSpectralOnly:
        h = spemb_forward(block, h, cfg);
        break;
    }
  }
  return h;
}

MambaHsi::MambaHsi(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t c = cfg.spectral_channels;
  const std::size_t d = cfg.embed_dim;
  const std::size_t k = cfg.class_count;
  Rng rng(cfg.seed);

  embed_w = Tensor::zeros({c, d}, true);
  embed_b = Tensor::zeros({d}, true);
  embed_gn_gamma = Tensor::full({d}, 1.0f, true);
  embed_gn_beta = Tensor::zeros({d}, true);
  fill_uniform(embed_w, rng, 1.0f / std::sqrt(static_cast<float>(c)));
  fill_uniform(embed_b, rng, 1.0f / std::sqrt(static_cast<float>(c)));

  for (std::uint32_t i = 0; i < cfg.encoder_depth; ++i) {
    EncoderBlock block;
    block.spatial = MambaLayer(dims_for(cfg.embed_dim, cfg));
    block.spatial.initialize(rng);
    block.spatial_gn_gamma = Tensor::full({d}, 1.0f, true);
    block.spatial_gn_beta = Tensor::zeros({d}, true);
    block.spectral = MambaLayer(dims_for(cfg.group_width(), cfg));
    block.spectral.initialize(rng);
    block.spectral_gn_gamma = Tensor::full({d}, 1.0f, true);
    block.spectral_gn_beta = Tensor::zeros({d}, true);
    block.fusion.w_spa = Tensor::scalar(rng.uniform(), true);
    block.fusion.w_spe = Tensor::scalar(rng.uniform(), true);
    blocks_.push_back(std::move(block));
  }

  head_w = Tensor::zeros({d, k}, true);
  head_b = Tensor::zeros({k}, true);
  fill_uniform(head_w, rng, 1.0f / std::sqrt(static_cast<float>(d)));
  fill_uniform(head_b, rng, 1.0f / std::sqrt(static_cast<float>(d)));
}

Tensor MambaHsi::embed(const Tensor& image) const {
  if (image.rank() != 4 || image.dim(3) != cfg_.spectral_channels) {
    fail(ErrorCode::kShape, "embed: expected [B, H, W, " + std::to_string(cfg_.spectral_channels) +
                                "] image, got " + shape_str(image.shape()));
  }
  Tensor x = ops::conv1x1(image, embed_w, embed_b);
  return ops::silu(ops::group_norm(x, cfg_.gn_groups, embed_gn_gamma, embed_gn_beta));
}

Tensor MambaHsi::seghead(const Tensor& h) const {
  check_map(h, cfg_, "seghead");
  return ops::conv1x1(h, head_w, head_b);
}

std::vector<NamedTensor> MambaHsi::parameters() const {
  std::vector<NamedTensor> p = {
      {"embed.w", embed_w},
      {"embed.b", embed_b},
      {"embed.gn.gamma", embed_gn_gamma},
      {"embed.gn.beta", embed_gn_beta},
  };
  const bool spatial = cfg_.variant != EncoderVariant::kSpectralOnly;
  const bool spectral = cfg_.variant != EncoderVariant::kSpatialOnly;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string pre = "encoder." + std::to_string(i) + ".";
    if (spatial) {
      for (auto& t : b.spatial.parameters(pre + "spamb.mamba.")) p.push_back(std::move(t));
      p.push_back({pre + "spamb.gn.gamma", b.spatial_gn_gamma});
      p.push_back({pre + "spamb.gn.beta", b.spatial_gn_beta});
    }
    if (spectral) {
      for (auto& t : b.spectral.parameters(pre + "spemb.mamba.")) p.push_back(std::move(t));
      p.push_back({pre + "spemb.gn.gamma", b.spectral_gn_gamma});
      p.push_back({pre + "spemb.gn.beta", b.spectral_gn_beta});
    }
    if (cfg_.variant == EncoderVariant::kFull) {
      p.push_back({pre + "ssfm.w_spa", b.fusion.w_spa});
      p.push_back({pre + "ssfm.w_spe", b.fusion.w_spe});
    }
  }
  p.push_back({"head.w", head_w});
  p.push_back({"head.b", head_b});
  return p;
}

Tensor masked_cross_entropy(const Tensor& logits, std::span<const std::uint16_t> labels,
                            std::span<const std::size_t> pixels) {
  if (logits.rank() != 4 || logits.dim(0) != 1) {
    fail(ErrorCode::kShape, "masked_cross_entropy: expected [1, H, W, K] logits, got " + shape_str(logits.shape()));
  }
  const std::size_t width = logits.dim(2);
  const std::size_t k = logits.dim(3);
  const std::size_t px = logits.dim(1) * width;
  if (labels.size() != px) fail(ErrorCode::kShape, "masked_cross_entropy: label raster size does not match logits");
  if (pixels.empty()) fail(ErrorCode::kData, "masked_cross_entropy: mask is empty");
  std::vector<std::size_t> targets;
  targets.reserve(pixels.size());
  for (auto i : pixels) {
    if (i >= px || labels[i] == 0 || labels[i] > k) {
      fail(ErrorCode::kData, "masked_cross_entropy: label " + std::to_string(i < px ? labels[i] : 0) +
                                 " at pixel (row " + std::to_string(i / width) + ", col " + std::to_string(i % width) +
                                 ") outside 1.." + std::to_string(k));
    }
    targets.push_back(labels[i] - 1u);
  }
  Tensor flat = ops::reshape(logits, {px, k});
  return ops::cross_entropy(ops::gather_rows(flat, pixels), targets);
}

std::vector<std::uint16_t> predict(const Tensor& logits) {
  if (logits.rank() != 4) fail(ErrorCode::kShape, "predict: expected [B, H, W, K] logits, got " + shape_str(logits.shape()));
  const std::size_t k = logits.dim(3);
  const std::size_t px = logits.numel() / k;
  const float* l = logits.data().data();
  std::vector<std::uint16_t> out(px);
  for (std::size_t i = 0; i < px; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (l[i * k + c] > l[i * k + best]) best = c;
    out[i] = static_cast<std::uint16_t>(best + 1);
  }
  return out;
}

}  // namespace mhsi
