// Command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mambahsi/mambahsi.h"

namespace {

using json = nlohmann::json;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Failure {
  int exit_code;
};

int exit_for(mhsi_status s) {
  switch (s) {
    case MHSI_OK:
      return kOk;
    case MHSI_E_USAGE:
      return kUsage;
    case MHSI_E_NUMERIC:
      return kNumeric;
    default:
      return kData;
  }
}

void check(mhsi_status s) {
  if (s == MHSI_OK) return;
  std::cerr << "error: " << mhsi_last_error() << "\n";
  throw Failure{exit_for(s)};
}

[[noreturn]] void usage_error(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  throw Failure{kUsage};
}

struct SceneDeleter {
  void operator()(mhsi_scene* s) const { mhsi_scene_free(s); }
};
struct ModelDeleter {
  void operator()(mhsi_model* m) const { mhsi_model_free(m); }
};
struct ReportDeleter {
  void operator()(mhsi_report* r) const { mhsi_report_free(r); }
};
using ScenePtr = std::unique_ptr<mhsi_scene, SceneDeleter>;
using ModelPtr = std::unique_ptr<mhsi_model, ModelDeleter>;
using ReportPtr = std::unique_ptr<mhsi_report, ReportDeleter>;

ScenePtr load_scene(const std::string& path) {
  mhsi_scene* s = nullptr;
  check(mhsi_scene_load(path.c_str(), &s));
  return ScenePtr(s);
}

ModelPtr load_model(const std::string& path) {
  mhsi_model* m = nullptr;
  check(mhsi_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

void write_text(const std::string& path, const std::string& text) {
  check(mhsi_write_text_atomic(path.c_str(), text.c_str()));
}

const char* variant_names[] = {"full", "sum", "spatial", "spectral"};
const char* scan_names[] = {"sequential", "parallel"};

// Optional overrides of the model configuration; names follow the config
// fields, with dashed aliases.
struct ConfigFlags {
  std::optional<uint32_t> embed_dim, spectral_groups, encoder_depth, class_count, state_size, expand, conv_width,
      gn_groups, epochs;
  std::optional<float> lr;
  std::optional<uint64_t> seed;
  std::optional<std::string> variant, scan_mode;

  void add_to(CLI::App* app, bool training) {
    app->add_option("--embed-dim,--embed_dim", embed_dim, "Hidden dimension D (default 128)");
    app->add_option("--spectral-groups,--spectral_groups", spectral_groups, "Spectral group count G (default 4)");
    app->add_option("--state-size,--state_size", state_size, "SSM state size N (default 16)");
    app->add_option("--expand", expand, "Mamba expansion factor (default 2)");
    app->add_option("--conv-width,--conv_width", conv_width, "Depthwise conv width (default 4)");
    app->add_option("--gn-groups,--gn_groups", gn_groups, "Group-norm groups (default 4)");
    app->add_option("--seed", seed, "Seed for initialization (default 1)");
    if (!training) return;
    app->add_option("--encoder-depth,--encoder_depth", encoder_depth, "Stacked encoder blocks (default 1)");
    app->add_option("--class-count,--class_count", class_count, "Class count K (default: scene classes)");
    app->add_option("--lr", lr, "Adam learning rate (default 3e-4)");
    app->add_option("--epochs", epochs, "Training epochs (default 300)");
    app->add_option("--variant", variant, "Encoder variant: full, sum, spatial, spectral")
        ->check(CLI::IsMember({"full", "sum", "spatial", "spectral"}));
    app->add_option("--scan-mode,--scan_mode", scan_mode, "Selective scan: sequential, parallel")
        ->check(CLI::IsMember({"sequential", "parallel"}));
  }

  void apply(mhsi_config& c) const {
    if (embed_dim) c.embed_dim = *embed_dim;
    if (spectral_groups) c.spectral_groups = *spectral_groups;
    if (encoder_depth) c.encoder_depth = *encoder_depth;
    if (class_count) c.class_count = *class_count;
    if (state_size) c.state_size = *state_size;
    if (expand) c.expand = *expand;
    if (conv_width) c.conv_width = *conv_width;
    if (gn_groups) c.gn_groups = *gn_groups;
    if (epochs) c.epochs = *epochs;
    if (lr) c.lr = *lr;
    if (seed) c.seed = *seed;
    if (variant) {
      for (uint8_t i = 0; i < 4; ++i)
        if (*variant == variant_names[i]) c.variant = i;
    }
    if (scan_mode) c.scan_mode = *scan_mode == "parallel" ? MHSI_SCAN_PARALLEL : MHSI_SCAN_SEQUENTIAL;
  }
};

json config_json(const mhsi_config& c) {
  return json{{"spectral_channels", c.spectral_channels},
              {"embed_dim", c.embed_dim},
              {"spectral_groups", c.spectral_groups},
              {"encoder_depth", c.encoder_depth},
              {"class_count", c.class_count},
              {"state_size", c.state_size},
              {"expand", c.expand},
              {"conv_width", c.conv_width},
              {"gn_groups", c.gn_groups},
              {"lr", c.lr},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"variant", variant_names[c.variant]},
              {"scan_mode", scan_names[c.scan_mode]}};
}

mhsi_mask parse_mask(const std::string& name) {
  if (name == "train") return MHSI_MASK_TRAIN;
  if (name == "val") return MHSI_MASK_VAL;
  return MHSI_MASK_TEST;
}

ReportPtr evaluate(const mhsi_model* model, const mhsi_scene* scene, mhsi_mask mask) {
  mhsi_report* r = nullptr;
  check(mhsi_evaluate(model, scene, mask, &r));
  return ReportPtr(r);
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  uint32_t h = 0, w = 0, c = 0, k = 0;
  float sigma = 0.05f;
  uint64_t seed = 1;
  std::string out;
};

void run_synth(const SynthArgs& a) {
  mhsi_scene* s = nullptr;
  check(mhsi_scene_synth(a.h, a.w, a.c, a.k, a.sigma, a.seed, &s));
  ScenePtr scene(s);
  check(mhsi_scene_save(scene.get(), a.out.c_str()));
  std::cout << "wrote " << a.out << " (" << a.h << "x" << a.w << ", " << a.c << " bands, " << a.k << " classes)\n";
}

// --- import ----------------------------------------------------------------

struct ImportArgs {
  std::string cube, labels, out;
  uint32_t h = 0, w = 0, c = 0;
};

void run_import(const ImportArgs& a) {
  mhsi_scene* s = nullptr;
  check(mhsi_scene_import_raw(a.cube.c_str(), a.labels.c_str(), a.h, a.w, a.c, &s));
  ScenePtr scene(s);
  check(mhsi_scene_save(scene.get(), a.out.c_str()));
  mhsi_scene_info info{};
  check(mhsi_scene_info_get(scene.get(), &info));
  std::cout << "wrote " << a.out << " (" << info.classes << " classes)\n";
}

// --- split -----------------------------------------------------------------

struct SplitArgs {
  std::string scene, out;
  size_t n_train = 30, n_val = 10;
  uint64_t seed = 1;
};

void run_split(const SplitArgs& a) {
  auto scene = load_scene(a.scene);
  check(mhsi_scene_split(scene.get(), a.n_train, a.n_val, a.seed));
  const std::string warnings = mhsi_scene_warnings(scene.get());
  if (!warnings.empty()) std::cerr << warnings;
  const std::string out = a.out.empty() ? a.scene : a.out;
  check(mhsi_scene_save(scene.get(), out.c_str()));
  mhsi_scene_info info{};
  check(mhsi_scene_info_get(scene.get(), &info));
  std::cout << "train " << info.n_train << ", val " << info.n_val << ", test " << info.n_test << " -> " << out << "\n";
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string scene, out, manifest;
  bool quiet = false;
  ConfigFlags cfg;
};

struct EpochLog {
  json entries = json::array();
  bool quiet = false;
};

void on_epoch(uint32_t epoch, double loss, int has_val, double val_oa, void* user) {
  auto* log = static_cast<EpochLog*>(user);
  json e{{"epoch", epoch}, {"train_loss", loss}, {"val_oa", has_val ? json(val_oa) : json(nullptr)}};
  log->entries.push_back(e);
  if (!log->quiet) {
    std::printf("epoch %u loss %.6f", epoch, loss);
    if (has_val) std::printf(" val_oa %.4f", val_oa);
    std::printf("\n");
    std::fflush(stdout);
  }
}

void run_train(const TrainArgs& a) {
  auto scene = load_scene(a.scene);
  mhsi_scene_info info{};
  check(mhsi_scene_info_get(scene.get(), &info));

  mhsi_config cfg;
  mhsi_config_default(&cfg);
  cfg.spectral_channels = info.bands;
  cfg.class_count = info.classes;
  a.cfg.apply(cfg);

  mhsi_model* m = nullptr;
  check(mhsi_model_create(&cfg, &m));
  ModelPtr model(m);

  EpochLog log;
  log.quiet = a.quiet;
  mhsi_train_summary summary{};
  check(mhsi_train(model.get(), scene.get(), on_epoch, &log, &summary));
  check(mhsi_model_save(model.get(), a.out.c_str()));

  json reports = json::object();
  if (info.n_val > 0) reports["val"] = json::parse(mhsi_report_json(evaluate(model.get(), scene.get(), MHSI_MASK_VAL).get()));
  if (info.n_test > 0) {
    reports["test"] = json::parse(mhsi_report_json(evaluate(model.get(), scene.get(), MHSI_MASK_TEST).get()));
  }

  if (!a.manifest.empty()) {
    json manifest{{"config", config_json(cfg)},
                  {"seed", cfg.seed},
                  {"scene", a.scene},
                  {"checkpoint", a.out},
                  {"best_epoch", summary.best_epoch},
                  {"epochs", log.entries},
                  {"reports", reports}};
    write_text(a.manifest, manifest.dump(2) + "\n");
  }

  std::cout << "trained " << summary.epochs_run << " epochs";
  if (summary.has_best_val) std::printf(", best val OA %.4f at epoch %u", summary.best_val_oa, summary.best_epoch);
  std::cout << "\n";
  if (reports.contains("test")) std::printf("test OA %.4f kappa %.4f\n", reports["test"]["oa"].get<double>(),
                                            reports["test"]["kappa"].get<double>());
  std::cout << "checkpoint " << a.out << "\n";
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string scene, checkpoint, mask = "test", out, json_out;
};

void run_eval(const EvalArgs& a) {
  auto scene = load_scene(a.scene);
  auto model = load_model(a.checkpoint);
  auto report = evaluate(model.get(), scene.get(), parse_mask(a.mask));
  const std::string text = std::string("mask = ") + a.mask + "\n" + mhsi_report_text(report.get());
  std::cout << text;
  if (!a.out.empty()) write_text(a.out, text);
  if (!a.json_out.empty()) write_text(a.json_out, mhsi_report_json(report.get()));
}

// --- predict ---------------------------------------------------------------

struct PredictArgs {
  std::string scene, checkpoint, out, palette;
};

void run_predict(const PredictArgs& a) {
  auto scene = load_scene(a.scene);
  auto model = load_model(a.checkpoint);
  mhsi_scene_info info{};
  check(mhsi_scene_info_get(scene.get(), &info));
  mhsi_config cfg{};
  check(mhsi_model_config(model.get(), &cfg));
  std::vector<uint16_t> raster(static_cast<size_t>(info.height) * info.width);
  check(mhsi_predict(model.get(), scene.get(), raster.data(), raster.size()));
  check(mhsi_render_map(raster.data(), info.height, info.width, cfg.class_count,
                        a.palette.empty() ? nullptr : a.palette.c_str(), a.out.c_str()));
  std::cout << "wrote " << a.out << " (" << info.width << "x" << info.height << ")\n";
}

// --- bench -----------------------------------------------------------------

struct BenchArgs {
  std::vector<size_t> sizes;
  std::string variant = "mamba", out;
  size_t repeats = 5, attention_cap = 100;
  ConfigFlags cfg;
};

void run_bench(const BenchArgs& a) {
  if (a.sizes.empty()) usage_error("--sizes needs at least one size");
  mhsi_config cfg;
  mhsi_config_default(&cfg);
  cfg.spectral_channels = 1;
  cfg.class_count = 2;
  a.cfg.apply(cfg);
  const auto kind = a.variant == "mamba" ? MHSI_BLOCK_MAMBA : MHSI_BLOCK_ATTENTION;
  char* csv = nullptr;
  check(mhsi_bench(a.sizes.data(), a.sizes.size(), &cfg, kind, a.repeats, a.attention_cap, &csv));
  const std::string text = csv;
  mhsi_string_free(csv);
  write_text(a.out, text);
  std::cout << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MambaHSI hyperspectral classification"};
  app.require_subcommand(1);
  // --h/--w are scene extents, so help is long-form only.
  app.set_help_flag("--help", "Print this help message and exit");

  SynthArgs synth;
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic labeled scene");
  cmd->add_option("--h", synth.h, "Height")->required();
  cmd->add_option("--w", synth.w, "Width")->required();
  cmd->add_option("--c", synth.c, "Bands")->required();
  cmd->add_option("--k", synth.k, "Classes (2..8)")->required();
  cmd->add_option("--sigma", synth.sigma, "Noise standard deviation");
  cmd->add_option("--seed", synth.seed, "Seed");
  cmd->add_option("--out", synth.out, "Output scene file")->required();
  cmd->callback([&] { run_synth(synth); });

  ImportArgs imp;
  cmd = app.add_subcommand("import", "Convert a raw float32 BIP cube and label raster");
  cmd->add_option("--cube", imp.cube, "float32 cube, band-interleaved by pixel")->required();
  cmd->add_option("--labels", imp.labels, "u16 label raster, or .csv")->required();
  cmd->add_option("--h", imp.h, "Height")->required();
  cmd->add_option("--w", imp.w, "Width")->required();
  cmd->add_option("--c", imp.c, "Bands")->required();
  cmd->add_option("--out", imp.out, "Output scene file")->required();
  cmd->callback([&] { run_import(imp); });

  SplitArgs split;
  cmd = app.add_subcommand("split", "Draw per-class train/val/test masks");
  cmd->add_option("--scene", split.scene, "Scene file")->required();
  cmd->add_option("--n-train,--n_train", split.n_train, "Train pixels per class");
  cmd->add_option("--n-val,--n_val", split.n_val, "Val pixels per class");
  cmd->add_option("--seed", split.seed, "Seed");
  cmd->add_option("--out", split.out, "Output scene (default: overwrite input)");
  cmd->callback([&] { run_split(split); });

  TrainArgs train;
  cmd = app.add_subcommand("train", "Train on the scene's train mask");
  cmd->add_option("--scene", train.scene, "Scene file")->required();
  cmd->add_option("--out", train.out, "Checkpoint path")->required();
  cmd->add_option("--manifest", train.manifest, "Run manifest (JSON)");
  cmd->add_flag("--quiet", train.quiet, "No per-epoch output");
  train.cfg.add_to(cmd, true);
  cmd->callback([&] { run_train(train); });

  EvalArgs eval;
  cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one mask");
  cmd->add_option("--scene", eval.scene, "Scene file")->required();
  cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint")->required();
  cmd->add_option("--mask", eval.mask, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  cmd->add_option("--out", eval.out, "Metrics text file");
  cmd->add_option("--json", eval.json_out, "Metrics JSON file");
  cmd->callback([&] { run_eval(eval); });

  PredictArgs pred;
  cmd = app.add_subcommand("predict", "Render a classification map");
  cmd->add_option("--scene", pred.scene, "Scene file")->required();
  cmd->add_option("--checkpoint", pred.checkpoint, "Checkpoint")->required();
  cmd->add_option("--out", pred.out, "Output PPM")->required();
  cmd->add_option("--palette", pred.palette, "Palette file, one 'R G B' line per class");
  cmd->callback([&] { run_predict(pred); });

  BenchArgs bench;
  cmd = app.add_subcommand("bench", "FLOP model and timing of one encoder block");
  cmd->add_option("--sizes", bench.sizes, "Side lengths, comma separated")->required()->delimiter(',');
  cmd->add_option("--variant", bench.variant, "mamba or attention")
      ->check(CLI::IsMember({"mamba", "attention", "self_attention"}));
  cmd->add_option("--repeats", bench.repeats, "Timed runs per size (median reported)");
  cmd->add_option("--attention-cap,--attention_cap", bench.attention_cap, "Largest side timed for attention");
  cmd->add_option("--out", bench.out, "Output CSV")->required();
  bench.cfg.add_to(cmd, false);
  cmd->callback([&] { run_bench(bench); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const Failure& f) {
    return f.exit_code;
  }
  return kOk;
}
