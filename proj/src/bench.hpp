#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "model.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace mhsi {

// Sequence layer inside SpaMB and SpeMB: the Mamba layer, or single-head
// softmax self-attention used as the quadratic reference.
enum class BlockKind { kMamba, kAttention };

const char* block_kind_name(BlockKind kind);
BlockKind parse_block_kind(const std::string& name);

// FLOP counts (1 multiply-add = 2 FLOPs, exp/sigmoid/softplus = 4 per element,
// other elementwise ops 1 per element).
double flops_mamba_layer(std::size_t seqs, std::size_t length, const MambaDims& dims);
double flops_attention_layer(std::size_t seqs, std::size_t length, std::size_t width);
double flops_group_norm(std::size_t elements);

struct BlockFlops {
  double spamb = 0.0;
  double spemb = 0.0;
  double fusion = 0.0;
  double total() const { return spamb + spemb + fusion; }
};

BlockFlops flops_breakdown(std::size_t height, std::size_t width, const ModelConfig& cfg, BlockKind kind);
// One encoder block (SpaMB + SpeMB + SSFM) in GFLOPs.
double flops_encoder_block(std::size_t height, std::size_t width, const ModelConfig& cfg, BlockKind kind);

struct AttentionLayer {
  Tensor wq, wk, wv, wo;  // [d, d]

  explicit AttentionLayer(std::size_t width = 0);
  void initialize(Rng& rng);
  // [S, L, d] -> [S, L, d]. Inference only; scores are built in row chunks.
  Tensor forward(const Tensor& x) const;
};

struct BenchRow {
  BlockKind kind = BlockKind::kMamba;
  std::size_t height = 0;
  std::size_t width = 0;
  double gflops_model = 0.0;
  std::optional<double> seconds;  // empty when skipped

  std::size_t length() const { return height * width; }
};

// Times one encoder block forward (median of `repeats`) on random square
// inputs of each side length. Attention sizes above `attention_cap` per side
// are reported without timing.
std::vector<BenchRow> bench_forward(std::span<const std::size_t> sides, const ModelConfig& cfg, BlockKind kind,
                                    std::size_t repeats = 5, std::size_t attention_cap = 100);

// CSV with header variant,H,W,L,gflops_model,seconds; skipped rows carry
// "skipped" in the seconds column.
std::string bench_csv(std::span<const BenchRow> rows);

}  // namespace mhsi
