#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace mhsi {

enum class MaskKind { kTrain, kVal, kTest };

const char* mask_name(MaskKind kind);

// Hyperspectral cube with labels and train/val/test masks. Pixels are
// row-major (h, w); the cube is (h, w, band) with band fastest. Label 0 is
// unlabeled, 1..classes are classes. Masks hold 0/1 bytes, are pairwise
// disjoint, and only mark labeled pixels.
struct HsiScene {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t bands = 0;
  std::uint32_t classes = 0;
  std::vector<float> cube;
  std::vector<std::uint16_t> labels;
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> val;
  std::vector<std::uint8_t> test;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  const std::vector<std::uint8_t>& mask(MaskKind kind) const;
  std::vector<std::uint8_t>& mask(MaskKind kind);
  std::vector<std::size_t> mask_indices(MaskKind kind) const;
};

// Throws ErrorCode::kData describing the first violated invariant.
void validate_scene(const HsiScene& scene);

// "HSC1" container: magic, u32 H, W, C, K (little-endian), float32 cube,
// u16 labels, then train, val, test masks as u8 rasters.
std::vector<std::uint8_t> encode_scene(const HsiScene& scene);
HsiScene decode_scene(std::span<const std::uint8_t> bytes);
void save_scene(const HsiScene& scene, const std::string& path);
HsiScene load_scene(const std::string& path);

// Whole image as a [1, H, W, C] tensor.
Tensor scene_image(const HsiScene& scene);

struct SplitMasks {
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> val;
  std::vector<std::uint8_t> test;
  std::vector<std::string> warnings;
};

// Per class: n_train train pixels, n_val val pixels, the rest test, drawn
// without replacement by a seeded Fisher-Yates shuffle of the class's pixels
// (row-major order, classes visited 1..K, one generator for the whole split).
// A class with fewer than n_train + n_val + 1 pixels gives all but one pixel
// to train/val in proportion n_train : n_val and records a warning.
SplitMasks split_per_class(std::span<const std::uint16_t> labels, std::uint32_t classes, std::size_t n_train,
                           std::size_t n_val, std::uint64_t seed);
// Applies split_per_class to the scene's labels, replacing its masks.
std::vector<std::string> split_scene(HsiScene& scene, std::size_t n_train, std::size_t n_val, std::uint64_t seed);

// Synthetic scene: K Voronoi regions around distinct seeded pixel sites; the
// spectrum of class k (0-based) is a Gaussian bump centred at band
// floor(k * C / K) with width max(1, C / (2K)), plus N(0, sigma^2) noise.
// Requires 2 <= K <= 8, C >= K, H * W >= K. Labels are dense; masks empty.
HsiScene synth_scene(std::uint32_t height, std::uint32_t width, std::uint32_t bands, std::uint32_t classes,
                     float noise_sigma, std::uint64_t seed);

// Builds a scene from a float32 band-interleaved-by-pixel cube and a label
// raster: raw little-endian u16, or CSV (".csv" suffix, H lines of W values).
HsiScene import_raw(const std::string& cube_path, const std::string& label_path, std::uint32_t height,
                    std::uint32_t width, std::uint32_t bands);

using Rgb = std::array<std::uint8_t, 3>;

// Colors for classes 1..K; class 0 always renders black.
struct Palette {
  std::vector<Rgb> colors;
};

// Distinct non-black colors; the first 24 come from a fixed table.
Palette default_palette(std::size_t classes);
// Text file with one "R G B" line (0..255) per class.
Palette load_palette(const std::string& path);

// Binary PPM (P6, maxval 255) of a class raster.
std::vector<std::uint8_t> encode_ppm(std::span<const std::uint16_t> classes, std::uint32_t height,
                                     std::uint32_t width, const Palette& palette);
void render_map(std::span<const std::uint16_t> classes, std::uint32_t height, std::uint32_t width,
                const Palette& palette, const std::string& path);

}  // namespace mhsi
