#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "model.hpp"
#include "scene.hpp"

namespace mhsi {

struct EpochRecord {
  std::uint32_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_oa;  // absent when the val mask is empty
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::uint32_t best_epoch = 0;  // 0: initial parameters kept
  std::optional<double> best_val_oa;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Whole-image training for model.config().epochs epochs with Adam. After each
// update the val-mask OA is measured; on return the model holds the
// parameters of the best val epoch (latest wins ties), or the final ones if
// the val mask is empty. A non-finite loss throws kNumeric naming the epoch.
TrainResult train(MambaHsi& model, const HsiScene& scene, const EpochCallback& on_epoch = {});

// Overall accuracy of the current parameters on one mask (no graph built).
double mask_accuracy(const MambaHsi& model, const HsiScene& scene, MaskKind kind);

// No-grad forward over the whole scene; 1-based class per pixel.
std::vector<std::uint16_t> predict_scene(const MambaHsi& model, const HsiScene& scene);

}  // namespace mhsi
