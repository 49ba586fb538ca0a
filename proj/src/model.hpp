#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mamba.hpp"
#include "ssm.hpp"
#include "tensor.hpp"

namespace mhsi {

// Encoder composition. kFull is SpaMB + SpeMB fused by SSFM; the others are
// ablations: plain summation of the two block outputs, or one block alone.
enum class EncoderVariant : std::uint8_t {
  kFull = 0,
  kSum = 1,
  kSpatialOnly = 2,
  kSpectralOnly = 3,
};

const char* variant_name(EncoderVariant v);
EncoderVariant parse_variant(const std::string& name);
const char* scan_mode_name(ScanMode m);
ScanMode parse_scan_mode(const std::string& name);

struct ModelConfig {
  std::uint32_t spectral_channels = 0;  // C
  std::uint32_t embed_dim = 128;        // D
  std::uint32_t spectral_groups = 4;    // G
  std::uint32_t encoder_depth = 1;
  std::uint32_t class_count = 0;  // K
  std::uint32_t state_size = 16;  // N
  std::uint32_t expand = 2;
  std::uint32_t conv_width = 4;
  std::uint32_t gn_groups = 4;
  float lr = 3e-4f;
  std::uint32_t epochs = 300;
  std::uint64_t seed = 1;
  EncoderVariant variant = EncoderVariant::kFull;
  ScanMode scan_mode = ScanMode::kSequential;

  // Spectral group width M = D / G.
  std::uint32_t group_width() const { return embed_dim / spectral_groups; }
  // Throws ErrorCode::kUsage on any violated constraint.
  void validate() const;
};

// Learnable SSFM weights, each a [1] tensor.
struct FusionWeights {
  Tensor w_spa;
  Tensor w_spe;
};

struct EncoderBlock {
  MambaLayer spatial;   // over the H*W pixel sequence, width D
  Tensor spatial_gn_gamma;
  Tensor spatial_gn_beta;
  MambaLayer spectral;  // over the G-group sequence of each pixel, width M
  Tensor spectral_gn_gamma;
  Tensor spectral_gn_beta;
  FusionWeights fusion;
};

// Spatial Mamba block on a [1, H, W, D] map: flatten the pixels row-major
// into one sequence, Mamba, reshape, GN, SiLU, add the input.
Tensor spamb_forward(const EncoderBlock& block, const Tensor& h, const ModelConfig& cfg);
// Spectral Mamba block: each pixel's D features split into G contiguous
// groups of width M form an independent length-G sequence; shared Mamba over
// all H*W sequences, reshape, GN, SiLU, add the input.
Tensor spemb_forward(const EncoderBlock& block, const Tensor& h, const ModelConfig& cfg);
// h_in + w_spa * h_spa + w_spe * h_spe.
Tensor ssfm_fuse(const Tensor& h_in, const Tensor& h_spa, const Tensor& h_spe, const FusionWeights& w);
// Applies the blocks in order according to cfg.variant. No blocks: identity.
Tensor encoder_forward(std::span<const EncoderBlock> blocks, const Tensor& e, const ModelConfig& cfg);

class MambaHsi {
 public:
  // Builds and initializes every parameter from cfg.seed.
  explicit MambaHsi(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  // [1, H, W, C] -> [1, H, W, D]: SiLU(GN(conv1x1(image))).
  Tensor embed(const Tensor& image) const;
  Tensor encode(const Tensor& e) const { return encoder_forward(blocks_, e, cfg_); }
  // [1, H, W, D] -> [1, H, W, K] logits.
  Tensor seghead(const Tensor& h) const;
  Tensor forward(const Tensor& image) const { return seghead(encode(embed(image))); }

  // Parameters the configured variant actually uses, in a stable order.
  std::vector<NamedTensor> parameters() const;

  std::vector<EncoderBlock>& blocks() { return blocks_; }
  const std::vector<EncoderBlock>& blocks() const { return blocks_; }

  Tensor embed_w;  // [C, D]
  Tensor embed_b;  // [D]
  Tensor embed_gn_gamma;
  Tensor embed_gn_beta;
  Tensor head_w;  // [D, K]
  Tensor head_b;  // [K]

 private:
  ModelConfig cfg_;
  std::vector<EncoderBlock> blocks_;
};

// Mean over masked pixels of -log softmax(logits)[label]. `labels` is the H*W
// raster (1..K on masked pixels), `pixels` the masked flat indices.
Tensor masked_cross_entropy(const Tensor& logits, std::span<const std::uint16_t> labels,
                            std::span<const std::size_t> pixels);

// Per-pixel argmax (1-based, ties to the lowest class) of [1, H, W, K] logits.
std::vector<std::uint16_t> predict(const Tensor& logits);

}  // namespace mhsi
