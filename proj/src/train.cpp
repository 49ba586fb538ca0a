#include "train.hpp"

#include <cmath>
#include <string>

#include "error.hpp"
#include "optim.hpp"

namespace mhsi {

namespace {

void check_scene(const MambaHsi& model, const HsiScene& scene) {
  const auto& cfg = model.config();
  if (scene.bands != cfg.spectral_channels) {
    fail(ErrorCode::kData, "scene has " + std::to_string(scene.bands) + " bands but the model expects " +
                               std::to_string(cfg.spectral_channels));
  }
  if (scene.classes > cfg.class_count) {
    fail(ErrorCode::kData, "scene has " + std::to_string(scene.classes) + " classes but the model has " +
                               std::to_string(cfg.class_count));
  }
}

double accuracy(std::span<const std::uint16_t> pred, const HsiScene& scene, const std::vector<std::size_t>& idx) {
  std::size_t hit = 0;
  for (auto i : idx) hit += pred[i] == scene.labels[i];
  return static_cast<double>(hit) / static_cast<double>(idx.size());
}

std::vector<std::vector<float>> snapshot(const std::vector<NamedTensor>& params) {
  std::vector<std::vector<float>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace

std::vector<std::uint16_t> predict_scene(const MambaHsi& model, const HsiScene& scene) {
  check_scene(model, scene);
  NoGradGuard guard;
  return predict(model.forward(scene_image(scene)));
}

double mask_accuracy(const MambaHsi& model, const HsiScene& scene, MaskKind kind) {
  auto idx = scene.mask_indices(kind);
  if (idx.empty()) fail(ErrorCode::kData, std::string(mask_name(kind)) + " mask is empty");
  return accuracy(predict_scene(model, scene), scene, idx);
}

TrainResult train(MambaHsi& model, const HsiScene& scene, const EpochCallback& on_epoch) {
  validate_scene(scene);
  check_scene(model, scene);
  const auto& cfg = model.config();
  TrainResult result;
  if (cfg.epochs == 0) return result;

  const auto train_idx = scene.mask_indices(MaskKind::kTrain);
  const auto val_idx = scene.mask_indices(MaskKind::kVal);
  if (train_idx.empty()) fail(ErrorCode::kData, "train mask is empty");

  const Tensor image = scene_image(scene);
  auto params = model.parameters();
  AdamState adam;
  adam.options.lr = cfg.lr;
  std::vector<std::vector<float>> best;

  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (auto& p : params) p.tensor.zero_grad();
    Tensor loss = masked_cross_entropy(model.forward(image), scene.labels, train_idx);
    const double loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      fail(ErrorCode::kNumeric, "training diverged at epoch " + std::to_string(epoch) + ": loss is " +
                                    std::to_string(loss_value));
    }
    backward(loss);
    adam_step(params, adam);

    EpochRecord rec{epoch, loss_value, std::nullopt};
    if (!val_idx.empty()) {
      const double oa = accuracy(predict_scene(model, scene), scene, val_idx);
      rec.val_oa = oa;
      if (!result.best_val_oa || oa >= *result.best_val_oa) {
        result.best_val_oa = oa;
        result.best_epoch = epoch;
        best = snapshot(params);
      }
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  if (val_idx.empty()) {
    result.best_epoch = cfg.epochs;
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto dst = params[i].tensor.mutable_data();
      std::copy(best[i].begin(), best[i].end(), dst.begin());
    }
  }
  for (auto& p : params) p.tensor.zero_grad();
  return result;
}

}  // namespace mhsi
