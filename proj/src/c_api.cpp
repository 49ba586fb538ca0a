#include "mambahsi/mambahsi.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include "bench.hpp"
#include "checkpoint.hpp"
#include "error.hpp"
#include "fileio.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "scene.hpp"
#include "train.hpp"

struct mhsi_scene {
  mhsi::HsiScene scene;
  std::string warnings;
};

struct mhsi_model {
  mhsi::MambaHsi model;
};

struct mhsi_report {
  mhsi::MetricsReport report;
  std::string text;
  std::string json;
};

namespace {

thread_local std::string g_last_error;

mhsi_status set_error(mhsi_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

template <typename F>
mhsi_status guarded(F&& body) {
  try {
    body();
    return MHSI_OK;
  } catch (const mhsi::Error& e) {
    return set_error(static_cast<mhsi_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(MHSI_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(MHSI_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(MHSI_E_INTERNAL, "unknown failure");
  }
}

void require(bool ok, const char* what) {
  if (!ok) mhsi::fail(mhsi::ErrorCode::kUsage, std::string("null argument: ") + what);
}

mhsi::ModelConfig to_cpp(const mhsi_config& c) {
  mhsi::ModelConfig m;
  m.spectral_channels = c.spectral_channels;
  m.embed_dim = c.embed_dim;
  m.spectral_groups = c.spectral_groups;
  m.encoder_depth = c.encoder_depth;
  m.class_count = c.class_count;
  m.state_size = c.state_size;
  m.expand = c.expand;
  m.conv_width = c.conv_width;
  m.gn_groups = c.gn_groups;
  m.lr = c.lr;
  m.epochs = c.epochs;
  m.seed = c.seed;
  if (c.variant > MHSI_VARIANT_SPECTRAL) mhsi::fail(mhsi::ErrorCode::kUsage, "unknown encoder variant");
  if (c.scan_mode > MHSI_SCAN_PARALLEL) mhsi::fail(mhsi::ErrorCode::kUsage, "unknown scan mode");
  m.variant = static_cast<mhsi::EncoderVariant>(c.variant);
  m.scan_mode = static_cast<mhsi::ScanMode>(c.scan_mode);
  return m;
}

mhsi_config to_c(const mhsi::ModelConfig& m) {
  mhsi_config c{};
  c.spectral_channels = m.spectral_channels;
  c.embed_dim = m.embed_dim;
  c.spectral_groups = m.spectral_groups;
  c.encoder_depth = m.encoder_depth;
  c.class_count = m.class_count;
  c.state_size = m.state_size;
  c.expand = m.expand;
  c.conv_width = m.conv_width;
  c.gn_groups = m.gn_groups;
  c.lr = m.lr;
  c.epochs = m.epochs;
  c.seed = m.seed;
  c.variant = static_cast<uint8_t>(m.variant);
  c.scan_mode = static_cast<uint8_t>(m.scan_mode);
  return c;
}

mhsi::MaskKind to_mask(mhsi_mask m) {
  switch (m) {
    case MHSI_MASK_TRAIN:
      return mhsi::MaskKind::kTrain;
    case MHSI_MASK_VAL:
      return mhsi::MaskKind::kVal;
    case MHSI_MASK_TEST:
      return mhsi::MaskKind::kTest;
  }
  mhsi::fail(mhsi::ErrorCode::kUsage, "unknown mask selector");
}

mhsi::BlockKind to_kind(mhsi_block_kind k) {
  if (k == MHSI_BLOCK_MAMBA) return mhsi::BlockKind::kMamba;
  if (k == MHSI_BLOCK_ATTENTION) return mhsi::BlockKind::kAttention;
  mhsi::fail(mhsi::ErrorCode::kUsage, "unknown block kind");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* mhsi_version(void) { return "0.1.0"; }

const char* mhsi_last_error(void) { return g_last_error.c_str(); }

void mhsi_string_free(char* s) { std::free(s); }

mhsi_status mhsi_scene_synth(uint32_t height, uint32_t width, uint32_t bands, uint32_t classes, float noise_sigma,
                             uint64_t seed, mhsi_scene** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mhsi_scene{mhsi::synth_scene(height, width, bands, classes, noise_sigma, seed), {}};
  });
}

mhsi_status mhsi_scene_load(const char* path, mhsi_scene** out) {
  return guarded([&] {
    require(path && out, "path/out");
    *out = new mhsi_scene{mhsi::load_scene(path), {}};
  });
}

mhsi_status mhsi_scene_import_raw(const char* cube_path, const char* label_path, uint32_t height, uint32_t width,
                                  uint32_t bands, mhsi_scene** out) {
  return guarded([&] {
    require(cube_path && label_path && out, "paths/out");
    *out = new mhsi_scene{mhsi::import_raw(cube_path, label_path, height, width, bands), {}};
  });
}

mhsi_status mhsi_scene_save(const mhsi_scene* scene, const char* path) {
  return guarded([&] {
    require(scene && path, "scene/path");
    mhsi::save_scene(scene->scene, path);
  });
}

mhsi_status mhsi_scene_info_get(const mhsi_scene* scene, mhsi_scene_info* out) {
  return guarded([&] {
    require(scene && out, "scene/out");
    const auto& s = scene->scene;
    *out = mhsi_scene_info{s.height,
                           s.width,
                           s.bands,
                           s.classes,
                           s.mask_indices(mhsi::MaskKind::kTrain).size(),
                           s.mask_indices(mhsi::MaskKind::kVal).size(),
                           s.mask_indices(mhsi::MaskKind::kTest).size()};
  });
}

mhsi_status mhsi_scene_split(mhsi_scene* scene, size_t n_train, size_t n_val, uint64_t seed) {
  return guarded([&] {
    require(scene, "scene");
    auto warnings = mhsi::split_scene(scene->scene, n_train, n_val, seed);
    scene->warnings.clear();
    for (const auto& w : warnings) scene->warnings += w + "\n";
  });
}

const char* mhsi_scene_warnings(const mhsi_scene* scene) { return scene ? scene->warnings.c_str() : ""; }

void mhsi_scene_free(mhsi_scene* scene) { delete scene; }

void mhsi_config_default(mhsi_config* cfg) {
  if (cfg) *cfg = to_c(mhsi::ModelConfig{});
}

mhsi_status mhsi_model_create(const mhsi_config* cfg, mhsi_model** out) {
  return guarded([&] {
    require(cfg && out, "cfg/out");
    *out = new mhsi_model{mhsi::MambaHsi(to_cpp(*cfg))};
  });
}

mhsi_status mhsi_model_load(const char* path, mhsi_model** out) {
  return guarded([&] {
    require(path && out, "path/out");
    *out = new mhsi_model{mhsi::load_checkpoint(path)};
  });
}

mhsi_status mhsi_model_save(const mhsi_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "model/path");
    mhsi::save_checkpoint(model->model, path);
  });
}

mhsi_status mhsi_model_config(const mhsi_model* model, mhsi_config* out) {
  return guarded([&] {
    require(model && out, "model/out");
    *out = to_c(model->model.config());
  });
}

void mhsi_model_free(mhsi_model* model) { delete model; }

mhsi_status mhsi_train(mhsi_model* model, const mhsi_scene* scene, mhsi_epoch_fn on_epoch, void* user,
                       mhsi_train_summary* out) {
  return guarded([&] {
    require(model && scene, "model/scene");
    mhsi::EpochCallback cb;
    if (on_epoch) {
      cb = [&](const mhsi::EpochRecord& r) {
        on_epoch(r.epoch, r.train_loss, r.val_oa.has_value(), r.val_oa.value_or(0.0), user);
      };
    }
    auto result = mhsi::train(model->model, scene->scene, cb);
    if (out) {
      *out = mhsi_train_summary{static_cast<uint32_t>(result.log.size()), result.best_epoch,
                                result.best_val_oa.has_value(), result.best_val_oa.value_or(0.0)};
    }
  });
}

mhsi_status mhsi_predict(const mhsi_model* model, const mhsi_scene* scene, uint16_t* out, size_t out_len) {
  return guarded([&] {
    require(model && scene && out, "model/scene/out");
    if (out_len < scene->scene.pixels()) mhsi::fail(mhsi::ErrorCode::kUsage, "predict: output buffer too small");
    auto pred = mhsi::predict_scene(model->model, scene->scene);
    std::memcpy(out, pred.data(), pred.size() * sizeof(uint16_t));
  });
}

mhsi_status mhsi_evaluate(const mhsi_model* model, const mhsi_scene* scene, mhsi_mask mask, mhsi_report** out) {
  return guarded([&] {
    require(model && scene && out, "model/scene/out");
    const auto kind = to_mask(mask);
    const auto& s = scene->scene;
    if (s.mask_indices(kind).empty()) {
      mhsi::fail(mhsi::ErrorCode::kData, std::string(mhsi::mask_name(kind)) + " mask is empty");
    }
    auto pred = mhsi::predict_scene(model->model, s);
    auto report = mhsi::evaluate(pred, s.labels, s.mask(kind), model->model.config().class_count);
    auto text = mhsi::report_to_text(report);
    auto json = mhsi::report_to_json(report);
    *out = new mhsi_report{std::move(report), std::move(text), std::move(json)};
  });
}

mhsi_status mhsi_report_summary_get(const mhsi_report* report, mhsi_report_summary* out) {
  return guarded([&] {
    require(report && out, "report/out");
    const auto& r = report->report;
    *out = mhsi_report_summary{static_cast<uint32_t>(r.classes), r.n, r.oa, r.aa, r.kappa};
  });
}

const char* mhsi_report_text(const mhsi_report* report) { return report ? report->text.c_str() : ""; }

const char* mhsi_report_json(const mhsi_report* report) { return report ? report->json.c_str() : ""; }

void mhsi_report_free(mhsi_report* report) { delete report; }

mhsi_status mhsi_render_map(const uint16_t* raster, uint32_t height, uint32_t width, uint32_t classes,
                            const char* palette_path, const char* out_path) {
  return guarded([&] {
    require(raster && out_path, "raster/out_path");
    auto palette = palette_path ? mhsi::load_palette(palette_path) : mhsi::default_palette(classes);
    mhsi::render_map(std::span(raster, static_cast<size_t>(height) * width), height, width, palette, out_path);
  });
}

mhsi_status mhsi_flops_encoder_block(uint32_t height, uint32_t width, const mhsi_config* cfg, mhsi_block_kind kind,
                                     double* gflops) {
  return guarded([&] {
    require(cfg && gflops, "cfg/gflops");
    *gflops = mhsi::flops_encoder_block(height, width, to_cpp(*cfg), to_kind(kind));
  });
}

mhsi_status mhsi_bench(const size_t* sides, size_t n_sides, const mhsi_config* cfg, mhsi_block_kind kind,
                       size_t repeats, size_t attention_cap, char** csv_out) {
  return guarded([&] {
    require(cfg && csv_out, "cfg/csv_out");
    require(sides || n_sides == 0, "sides");
    auto rows = mhsi::bench_forward(std::span(sides, n_sides), to_cpp(*cfg), to_kind(kind), repeats, attention_cap);
    *csv_out = dup_string(mhsi::bench_csv(rows));
  });
}

mhsi_status mhsi_write_text_atomic(const char* path, const char* text) {
  return guarded([&] {
    require(path && text, "path/text");
    mhsi::write_text_atomic(path, text);
  });
}

}  // extern "C"
