#include "checkpoint.hpp"

#include <algorithm>
#include <map>

#include "error.hpp"
#include "fileio.hpp"

namespace mhsi {

namespace {

constexpr std::uint32_t kVersion = 1;

void write_config(ByteWriter& w, const ModelConfig& c) {
  w.u32(c.spectral_channels);
  w.u32(c.embed_dim);
  w.u32(c.spectral_groups);
  w.u32(c.encoder_depth);
  w.u32(c.class_count);
  w.u32(c.state_size);
  w.u32(c.expand);
  w.u32(c.conv_width);
  w.u32(c.gn_groups);
  w.f32(c.lr);
  w.u32(c.epochs);
  w.u64(c.seed);
  w.u8(static_cast<std::uint8_t>(c.variant));
  w.u8(static_cast<std::uint8_t>(c.scan_mode));
}

ModelConfig read_config(ByteReader& r) {
  ModelConfig c;
  c.spectral_channels = r.u32();
  c.embed_dim = r.u32();
  c.spectral_groups = r.u32();
  c.encoder_depth = r.u32();
  c.class_count = r.u32();
  c.state_size = r.u32();
  c.expand = r.u32();
  c.conv_width = r.u32();
  c.gn_groups = r.u32();
  c.lr = r.f32();
  c.epochs = r.u32();
  c.seed = r.u64();
  const std::size_t at = r.offset();
  const std::uint8_t variant = r.u8();
  if (variant > 3) r.error_at(at, "unknown encoder variant " + std::to_string(variant));
  c.variant = static_cast<EncoderVariant>(variant);
  const std::uint8_t mode = r.u8();
  if (mode > 1) r.error_at(at + 1, "unknown scan mode " + std::to_string(mode));
  c.scan_mode = static_cast<ScanMode>(mode);
  try {
    c.validate();
  } catch (const Error& e) {
    r.error_at(8, e.what());
  }
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const MambaHsi& model) {
  ByteWriter w;
  w.str("MHSW");
  w.u32(kVersion);
  write_config(w, model.config());
  for (const auto& p : model.parameters()) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.str(p.name);
    const auto& shape = p.tensor.shape();
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto e : shape) w.u32(static_cast<std::uint32_t>(e));
    for (float v : p.tensor.data()) w.f32(v);
  }
  return w.bytes();
}

MambaHsi decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.str(4) != "MHSW") r.error_at(0, "bad magic (expected MHSW)");
  const std::uint32_t version = r.u32();
  if (version != kVersion) r.error_at(4, "unsupported version " + std::to_string(version));
  MambaHsi model(read_config(r));

  std::map<std::string, Tensor> params;
  for (auto& p : model.parameters()) params.emplace(p.name, p.tensor);
  std::map<std::string, bool> seen;
  while (!r.done()) {
    const std::size_t start = r.offset();
    const std::string name = r.str(r.u16());
    auto it = params.find(name);
    if (it == params.end()) r.error_at(start, "unknown parameter '" + name + "'");
    if (seen[name]) r.error_at(start, "duplicate parameter '" + name + "'");
    seen[name] = true;
    const std::size_t rank = r.u8();
    Shape shape(rank);
    for (auto& e : shape) e = r.u32();
    if (shape != it->second.shape()) {
      r.error_at(start, "parameter '" + name + "' has shape " + shape_str(shape) + ", model expects " +
                            shape_str(it->second.shape()));
    }
    auto dst = it->second.mutable_data();
    for (auto& v : dst) v = r.f32();
  }
  for (const auto& [name, t] : params) {
    if (!seen[name]) r.error_at(r.offset(), "missing parameter '" + name + "'");
  }
  return model;
}

void save_checkpoint(const MambaHsi& model, const std::string& path) {
  write_file_atomic(path, encode_checkpoint(model));
}

MambaHsi load_checkpoint(const std::string& path) {
  auto bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const Error& e) {
    fail(e.code(), "'" + path + "': " + e.what());
  }
}

}  // namespace mhsi
