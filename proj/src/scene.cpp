#include "scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "error.hpp"
#include "fileio.hpp"
#include "rng.hpp"

namespace mhsi {

namespace {

constexpr char kSceneMagic[4] = {'H', 'S', 'C', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 * 4;

}  // namespace

const char* mask_name(MaskKind kind) {
  switch (kind) {
    case MaskKind::kTrain:
      return "train";
    case MaskKind::kVal:
      return "val";
    case MaskKind::kTest:
      return "test";
  }
  return "?";
}

const std::vector<std::uint8_t>& HsiScene::mask(MaskKind kind) const {
  return kind == MaskKind::kTrain ? train : kind == MaskKind::kVal ? val : test;
}

std::vector<std::uint8_t>& HsiScene::mask(MaskKind kind) {
  return kind == MaskKind::kTrain ? train : kind == MaskKind::kVal ? val : test;
}

std::vector<std::size_t> HsiScene::mask_indices(MaskKind kind) const {
  const auto& m = mask(kind);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) idx.push_back(i);
  return idx;
}

void validate_scene(const HsiScene& s) {
  const std::size_t px = s.pixels();
  if (s.cube.size() != px * s.bands) fail(ErrorCode::kData, "scene: cube size does not match H*W*C");
  if (s.labels.size() != px) fail(ErrorCode::kData, "scene: label raster size does not match H*W");
  for (auto kind : {MaskKind::kTrain, MaskKind::kVal, MaskKind::kTest}) {
    if (s.mask(kind).size() != px) fail(ErrorCode::kData, std::string("scene: ") + mask_name(kind) + " mask size mismatch");
  }
  std::uint16_t max_label = 0;
  for (std::size_t i = 0; i < px; ++i) {
    const std::uint16_t lab = s.labels[i];
    max_label = std::max(max_label, lab);
    const std::uint8_t tr = s.train[i], va = s.val[i], te = s.test[i];
    if (tr > 1 || va > 1 || te > 1) fail(ErrorCode::kData, "scene: mask value other than 0/1 at pixel " + std::to_string(i));
    if (tr + va + te > 1) fail(ErrorCode::kData, "scene: masks overlap at pixel " + std::to_string(i));
    if (lab == 0 && tr + va + te > 0) fail(ErrorCode::kData, "scene: mask marks unlabeled pixel " + std::to_string(i));
  }
  if (max_label != s.classes) {
    fail(ErrorCode::kData, "scene: class count " + std::to_string(s.classes) + " but largest label is " +
                               std::to_string(max_label));
  }
}

std::vector<std::uint8_t> encode_scene(const HsiScene& s) {
  validate_scene(s);
  ByteWriter w;
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kSceneMagic), 4));
  w.u32(s.height);
  w.u32(s.width);
  w.u32(s.bands);
  w.u32(s.classes);
  for (float v : s.cube) w.f32(v);
  for (auto v : s.labels) w.u16(v);
  for (auto kind : {MaskKind::kTrain, MaskKind::kVal, MaskKind::kTest}) w.raw(s.mask(kind));
  return w.bytes();
}

HsiScene decode_scene(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "HSC1");
  if (r.remaining() < 4 || std::memcmp(bytes.data(), kSceneMagic, 4) != 0) r.error("bad magic (expected \"HSC1\")");
  r.str(4);
  HsiScene s;
  s.height = r.u32();
  s.width = r.u32();
  s.bands = r.u32();
  s.classes = r.u32();
  const std::uint64_t px = static_cast<std::uint64_t>(s.height) * s.width;
  const std::uint64_t need = px * s.bands * 4 + px * 2 + px * 3;
  if (r.remaining() < need) {
    r.error_at(kHeaderBytes + std::min<std::uint64_t>(need, r.remaining()),
               "truncated: payload needs " + std::to_string(need) + " bytes, found " + std::to_string(r.remaining()));
  }
  if (r.remaining() > need) r.error_at(kHeaderBytes + need, "unexpected trailing bytes");
  if (s.classes > 0xFFFF) r.error_at(16, "class count exceeds u16 label range");

  s.cube.resize(px * s.bands);
  for (auto& v : s.cube) v = r.f32();
  const std::size_t label_offset = r.offset();
  s.labels.resize(px);
  std::uint16_t max_label = 0;
  for (std::size_t i = 0; i < px; ++i) {
    s.labels[i] = r.u16();
    if (s.labels[i] > s.classes) {
      r.error_at(label_offset + 2 * i, "label " + std::to_string(s.labels[i]) + " exceeds class count " +
                                           std::to_string(s.classes));
    }
    max_label = std::max(max_label, s.labels[i]);
  }
  if (max_label != s.classes) {
    r.error_at(16, "class count " + std::to_string(s.classes) + " but largest label is " + std::to_string(max_label));
  }
  const std::size_t mask_offset = r.offset();
  for (auto kind : {MaskKind::kTrain, MaskKind::kVal, MaskKind::kTest}) {
    auto& m = s.mask(kind);
    m.resize(px);
    for (auto& v : m) v = r.u8();
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& m = s.mask(static_cast<MaskKind>(k));
    for (std::size_t i = 0; i < px; ++i) {
      const std::size_t off = mask_offset + k * px + i;
      if (m[i] > 1) r.error_at(off, std::string(mask_name(static_cast<MaskKind>(k))) + " mask value is not 0/1");
      if (m[i] && s.labels[i] == 0) {
        r.error_at(off, std::string(mask_name(static_cast<MaskKind>(k))) + " mask marks unlabeled pixel " + std::to_string(i));
      }
      if (m[i] && k > 0 && (s.train[i] || (k == 2 && s.val[i]))) {
        r.error_at(off, "masks overlap at pixel " + std::to_string(i));
      }
    }
  }
  return s;
}

void save_scene(const HsiScene& scene, const std::string& path) { write_file_atomic(path, encode_scene(scene)); }

HsiScene load_scene(const std::string& path) {
  const auto bytes = read_file(path);
  try {
    return decode_scene(bytes);
  } catch (const Error& e) {
    fail(e.code(), "'" + path + "': " + e.what());
  }
}

Tensor scene_image(const HsiScene& scene) {
  return Tensor::from({1, scene.height, scene.width, scene.bands}, scene.cube);
}

SplitMasks split_per_class(std::span<const std::uint16_t> labels, std::uint32_t classes, std::size_t n_train,
                           std::size_t n_val, std::uint64_t seed) {
  SplitMasks out;
  out.train.assign(labels.size(), 0);
  out.val.assign(labels.size(), 0);
  out.test.assign(labels.size(), 0);
  std::vector<std::vector<std::size_t>> members(classes + 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > classes) fail(ErrorCode::kData, "split: label " + std::to_string(labels[i]) + " at pixel " +
                                                        std::to_string(i) + " exceeds class count");
    if (labels[i] > 0) members[labels[i]].push_back(i);
  }
  Rng rng(seed);
  for (std::uint32_t k = 1; k <= classes; ++k) {
    auto& px = members[k];
    if (px.empty()) fail(ErrorCode::kData, "split: class " + std::to_string(k) + " has no labeled pixels");
    for (std::size_t i = px.size(); i-- > 1;) std::swap(px[i], px[rng.below(i + 1)]);
    std::size_t tr = n_train;
    std::size_t va = n_val;
    if (n_train + n_val > 0 && px.size() < n_train + n_val + 1) {
      const std::size_t avail = px.size() - 1;
      tr = avail * n_train / (n_train + n_val);
      va = avail - tr;
      out.warnings.push_back("class " + std::to_string(k) + " has only " + std::to_string(px.size()) +
                             " pixels; using " + std::to_string(tr) + " train / " + std::to_string(va) + " val");
    }
    for (std::size_t i = 0; i < px.size(); ++i) {
      if (i < tr) {
        out.train[px[i]] = 1;
      } else if (i < tr + va) {
        out.val[px[i]] = 1;
      } else {
        out.test[px[i]] = 1;
      }
    }
  }
  return out;
}

std::vector<std::string> split_scene(HsiScene& scene, std::size_t n_train, std::size_t n_val, std::uint64_t seed) {
  auto m = split_per_class(scene.labels, scene.classes, n_train, n_val, seed);
  scene.train = std::move(m.train);
  scene.val = std::move(m.val);
  scene.test = std::move(m.test);
  return m.warnings;
}

HsiScene synth_scene(std::uint32_t height, std::uint32_t width, std::uint32_t bands, std::uint32_t classes,
                     float noise_sigma, std::uint64_t seed) {
  if (classes < 2 || classes > 8) fail(ErrorCode::kUsage, "synth: class count must be in [2, 8], got " + std::to_string(classes));
  if (bands < classes) fail(ErrorCode::kUsage, "synth: need at least as many bands as classes");
  if (static_cast<std::uint64_t>(height) * width < classes) fail(ErrorCode::kUsage, "synth: image smaller than class count");
  if (!(noise_sigma >= 0.0f)) fail(ErrorCode::kUsage, "synth: noise sigma must be >= 0");

  Rng rng(seed);
  HsiScene s;
  s.height = height;
  s.width = width;
  s.bands = bands;
  s.classes = classes;
  const std::size_t px = s.pixels();

  std::vector<std::size_t> sites;
  while (sites.size() < classes) {
    const std::size_t p = rng.below(px);
    if (std::find(sites.begin(), sites.end(), p) == sites.end()) sites.push_back(p);
  }
  s.labels.resize(px);
  for (std::size_t i = 0; i < px; ++i) {
    const double y = static_cast<double>(i / width), x = static_cast<double>(i % width);
    std::size_t best = 0;
    double best_d = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      const double dy = y - static_cast<double>(sites[k] / width);
      const double dx = x - static_cast<double>(sites[k] % width);
      const double d = dy * dy + dx * dx;
      if (k == 0 || d < best_d) {
        best = k;
        best_d = d;
      }
    }
    s.labels[i] = static_cast<std::uint16_t>(best + 1);
  }

  const double bump_width = std::max(1.0, static_cast<double>(bands) / (2.0 * classes));
  std::vector<float> signature(static_cast<std::size_t>(classes) * bands);
  for (std::size_t k = 0; k < classes; ++k) {
    const double center = std::floor(static_cast<double>(k * bands) / classes);
    for (std::size_t b = 0; b < bands; ++b) {
      const double z = (static_cast<double>(b) - center) / bump_width;
      signature[k * bands + b] = static_cast<float>(std::exp(-0.5 * z * z));
    }
  }
  s.cube.resize(px * bands);
  for (std::size_t i = 0; i < px; ++i) {
    const std::size_t k = s.labels[i] - 1u;
    for (std::size_t b = 0; b < bands; ++b) {
      const float noise = noise_sigma > 0.0f ? static_cast<float>(noise_sigma * rng.normal()) : 0.0f;
      s.cube[i * bands + b] = signature[k * bands + b] + noise;
    }
  }
  s.train.assign(px, 0);
  s.val.assign(px, 0);
  s.test.assign(px, 0);
  return s;
}

HsiScene import_raw(const std::string& cube_path, const std::string& label_path, std::uint32_t height,
                    std::uint32_t width, std::uint32_t bands) {
  if (height == 0 || width == 0 || bands == 0) fail(ErrorCode::kUsage, "import: extents must be >= 1");
  HsiScene s;
  s.height = height;
  s.width = width;
  s.bands = bands;
  const std::size_t px = s.pixels();

  const auto cube_bytes = read_file(cube_path);
  if (cube_bytes.size() != px * bands * 4) {
    fail(ErrorCode::kData, "import: '" + cube_path + "' holds " + std::to_string(cube_bytes.size()) +
                               " bytes, expected " + std::to_string(px * bands * 4) + " for float32 H*W*C");
  }
  ByteReader cr(cube_bytes, cube_path);
  s.cube.resize(px * bands);
  for (auto& v : s.cube) v = cr.f32();

  s.labels.resize(px);
  const bool csv = label_path.size() >= 4 && label_path.compare(label_path.size() - 4, 4, ".csv") == 0;
  if (csv) {
    std::ifstream in(label_path);
    if (!in) fail(ErrorCode::kData, "cannot open '" + label_path + "'");
    std::string line;
    std::size_t row = 0;
    std::size_t i = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (row >= height) fail(ErrorCode::kData, "import: '" + label_path + "' has more than " + std::to_string(height) + " rows");
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      long v = 0;
      std::size_t col = 0;
      while (ls >> v) {
        if (v < 0 || v > 0xFFFF) fail(ErrorCode::kData, "import: label out of u16 range at row " + std::to_string(row));
        if (col >= width) fail(ErrorCode::kData, "import: row " + std::to_string(row) + " has more than " + std::to_string(width) + " values");
        s.labels[i++] = static_cast<std::uint16_t>(v);
        ++col;
      }
      if (!ls.eof()) fail(ErrorCode::kData, "import: non-numeric label at row " + std::to_string(row));
      if (col != width) fail(ErrorCode::kData, "import: row " + std::to_string(row) + " has " + std::to_string(col) + " values");
      ++row;
    }
    if (row != height) fail(ErrorCode::kData, "import: '" + label_path + "' has " + std::to_string(row) + " rows, expected " + std::to_string(height));
  } else {
    const auto label_bytes = read_file(label_path);
    if (label_bytes.size() != px * 2) {
      fail(ErrorCode::kData, "import: '" + label_path + "' holds " + std::to_string(label_bytes.size()) +
                                 " bytes, expected " + std::to_string(px * 2) + " for u16 H*W");
    }
    ByteReader lr(label_bytes, label_path);
    for (auto& v : s.labels) v = lr.u16();
  }
  s.classes = *std::max_element(s.labels.begin(), s.labels.end());
  s.train.assign(px, 0);
  s.val.assign(px, 0);
  s.test.assign(px, 0);
  return s;
}

Palette default_palette(std::size_t classes) {
  static constexpr Rgb kTable[] = {
      {255, 0, 0},     {0, 255, 0},     {0, 0, 255},     {255, 255, 0},   {255, 0, 255},   {0, 255, 255},
      {255, 128, 0},   {128, 0, 255},   {0, 128, 0},     {128, 0, 0},     {0, 0, 128},     {128, 128, 0},
      {0, 128, 128},   {128, 0, 128},   {255, 128, 128}, {128, 255, 128}, {128, 128, 255}, {192, 192, 192},
      {255, 192, 0},   {96, 64, 32},    {0, 192, 255},   {255, 0, 128},   {64, 128, 64},   {160, 82, 45},
  };
  constexpr std::size_t kTableSize = sizeof(kTable) / sizeof(kTable[0]);
  Palette p;
  for (std::size_t k = 0; k < classes; ++k) {
    if (k < kTableSize) {
      p.colors.push_back(kTable[k]);
      continue;
    }
    // Golden-angle hue walk for anything past the table.
    const double hue = std::fmod(static_cast<double>(k) * 137.50776405, 360.0) / 60.0;
    const double value = 0.55 + 0.4 * static_cast<double>((k / 7) % 2);
    const double f = hue - std::floor(hue);
    const double q = value * (1.0 - 0.8 * f), t = value * (1.0 - 0.8 * (1.0 - f)), lo = value * 0.2;
    double r = value, g = t, b = lo;
    switch (static_cast<int>(hue)) {
      case 0: r = value; g = t; b = lo; break;
      case 1: r = q; g = value; b = lo; break;
      case 2: r = lo; g = value; b = t; break;
      case 3: r = lo; g = q; b = value; break;
      case 4: r = t; g = lo; b = value; break;
      default: r = value; g = lo; b = q; break;
    }
    p.colors.push_back({static_cast<std::uint8_t>(r * 255.0), static_cast<std::uint8_t>(g * 255.0),
                        static_cast<std::uint8_t>(b * 255.0)});
  }
  return p;
}

Palette load_palette(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kData, "cannot open palette '" + path + "'");
  Palette p;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int r = -1, g = -1, b = -1;
    if (!(ls >> r >> g >> b) || r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) {
      fail(ErrorCode::kData, "palette '" + path + "' line " + std::to_string(lineno) + ": expected \"R G B\" in 0..255");
    }
    p.colors.push_back({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)});
  }
  return p;
}

std::vector<std::uint8_t> encode_ppm(std::span<const std::uint16_t> classes, std::uint32_t height,
                                     std::uint32_t width, const Palette& palette) {
  const std::size_t px = static_cast<std::size_t>(height) * width;
  if (classes.size() != px) fail(ErrorCode::kShape, "render_map: raster size does not match H*W");
  ByteWriter w;
  w.str("P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n");
  for (std::size_t i = 0; i < px; ++i) {
    const std::uint16_t k = classes[i];
    if (k > palette.colors.size()) {
      fail(ErrorCode::kData, "render_map: class " + std::to_string(k) + " at pixel " + std::to_string(i) +
                                 " exceeds palette size " + std::to_string(palette.colors.size()));
    }
    const Rgb c = k == 0 ? Rgb{0, 0, 0} : palette.colors[k - 1];
    w.raw(c);
  }
  return w.bytes();
}

void render_map(std::span<const std::uint16_t> classes, std::uint32_t height, std::uint32_t width,
                const Palette& palette, const std::string& path) {
  write_file_atomic(path, encode_ppm(classes, height, width, palette));
}

}  // namespace mhsi
