#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "json.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "rng.hpp"

using namespace mhsi;

namespace {

// Builds prediction/label rasters realizing a confusion matrix.
struct Rasters {
  std::vector<std::uint16_t> pred, labels;
  std::vector<std::uint8_t> mask;
};

Rasters realize(std::size_t k, const std::vector<std::uint64_t>& confusion) {
  Rasters r;
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t p = 0; p < k; ++p)
      for (std::uint64_t n = 0; n < confusion[t * k + p]; ++n) {
        r.labels.push_back(static_cast<std::uint16_t>(t + 1));
        r.pred.push_back(static_cast<std::uint16_t>(p + 1));
        r.mask.push_back(1);
      }
  return r;
}

MetricsReport eval_confusion(std::size_t k, const std::vector<std::uint64_t>& c) {
  Rasters r = realize(k, c);
  return evaluate(r.pred, r.labels, r.mask, k);
}

}  // namespace

TEST(Metrics, PerfectPrediction) {
  std::vector<std::uint16_t> labels = {1, 2, 3, 3, 2, 0};
  std::vector<std::uint8_t> mask = {1, 1, 1, 1, 1, 0};
  auto r = evaluate(labels, labels, mask, 3);
  EXPECT_EQ(r.n, 5u);
  EXPECT_EQ(r.oa, 1.0);
  EXPECT_EQ(r.aa, 1.0);
  EXPECT_EQ(r.kappa, 1.0);
}

TEST(Metrics, ChanceConfusion) {
  auto r = eval_confusion(2, {50, 0, 50, 0});
  EXPECT_NEAR(r.oa, 0.5, 1e-10);
  EXPECT_NEAR(r.aa, 0.5, 1e-10);
  EXPECT_NEAR(r.kappa, 0.0, 1e-10);
}

TEST(Metrics, HandComputedKappa) {
  auto r = eval_confusion(2, {40, 10, 5, 45});
  EXPECT_NEAR(r.oa, 0.85, 1e-10);
  EXPECT_NEAR(r.aa, (0.8 + 0.9) / 2, 1e-10);
  // p_e = (50*45 + 50*55) / 100^2 = 0.5
  EXPECT_NEAR(r.kappa, 0.70, 1e-10);
  EXPECT_EQ(r.at(1, 2), 10u);
  EXPECT_EQ(r.at(2, 1), 5u);
}

TEST(Metrics, ConfusionOnlyCountsMaskedPixels) {
  std::vector<std::uint16_t> labels = {1, 1, 2, 2};
  std::vector<std::uint16_t> pred = {1, 2, 2, 1};
  std::vector<std::uint8_t> mask = {1, 0, 1, 0};
  auto r = evaluate(pred, labels, mask, 2);
  EXPECT_EQ(r.n, 2u);
  EXPECT_EQ(r.oa, 1.0);
}

TEST(Metrics, EmptyMaskFails) {
  std::vector<std::uint16_t> labels = {1, 2};
  std::vector<std::uint8_t> mask = {0, 0};
  try {
    evaluate(labels, labels, mask, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kData);
  }
}

TEST(Metrics, AbsentClassExcludedFromAverageWithWarning) {
  // Class 3 never appears as a true label.
  auto r = eval_confusion(3, {8, 2, 0, 1, 9, 0, 0, 0, 0});
  EXPECT_TRUE(std::isnan(r.per_class[2]));
  EXPECT_NEAR(r.aa, (0.8 + 0.9) / 2, 1e-12);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("class 3"), std::string::npos);
}

TEST(Metrics, OutOfRangeLabelFails) {
  std::vector<std::uint16_t> labels = {1, 3};
  std::vector<std::uint16_t> pred = {1, 1};
  std::vector<std::uint8_t> mask = {1, 1};
  EXPECT_THROW(evaluate(pred, labels, mask, 2), Error);
}

TEST(Metrics, InvariantsOnRandomConfusions) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    std::vector<std::uint64_t> c(k * k);
    for (auto& v : c) v = rng.below(20);
    c[0] += 1;
    auto r = report_from_confusion(k, c);
    std::uint64_t total = 0, trace = 0;
    for (std::size_t i = 0; i < k; ++i) {
      trace += c[i * k + i];
      for (std::size_t j = 0; j < k; ++j) total += c[i * k + j];
    }
    EXPECT_EQ(r.n, total);
    EXPECT_NEAR(r.oa, static_cast<double>(trace) / total, 1e-12);
    EXPECT_LE(r.kappa, r.oa + 1e-12);
    EXPECT_GE(r.oa, 0.0);
    EXPECT_LE(r.aa, 1.0);

    // Relabel by a random permutation: rows and columns move together.
    std::vector<std::size_t> perm(k);
    for (std::size_t i = 0; i < k; ++i) perm[i] = i;
    for (std::size_t i = k; i-- > 1;) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<std::uint64_t> pc(k * k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) pc[perm[i] * k + perm[j]] = c[i * k + j];
    auto pr = report_from_confusion(k, pc);
    EXPECT_NEAR(pr.oa, r.oa, 1e-12);
    EXPECT_NEAR(pr.aa, r.aa, 1e-12);
    EXPECT_NEAR(pr.kappa, r.kappa, 1e-12);
  }
}

TEST(Metrics, KappaIsOneOnlyForDiagonal) {
  EXPECT_EQ(report_from_confusion(3, {4, 0, 0, 0, 5, 0, 0, 0, 6}).kappa, 1.0);
  EXPECT_LT(report_from_confusion(3, {4, 0, 0, 0, 5, 1, 0, 0, 6}).kappa, 1.0);
}

TEST(Metrics, LogitShiftLeavesMetricsUnchanged) {
  Rng rng(2);
  Tensor logits = Tensor::zeros({1, 4, 5, 3});
  for (auto& v : logits.mutable_data()) v = rng.uniform(-1.0f, 1.0f);
  Tensor shifted = logits.clone();
  auto sd = shifted.mutable_data();
  for (std::size_t p = 0; p < 20; ++p) {
    const float c = rng.uniform(-5.0f, 5.0f);
    for (std::size_t k = 0; k < 3; ++k) sd[p * 3 + k] += c;
  }
  std::vector<std::uint16_t> labels(20);
  for (auto& l : labels) l = static_cast<std::uint16_t>(1 + rng.below(3));
  std::vector<std::uint8_t> mask(20, 1);
  auto a = evaluate(predict(logits), labels, mask, 3);
  auto b = evaluate(predict(shifted), labels, mask, 3);
  EXPECT_EQ(a.confusion, b.confusion);
  EXPECT_EQ(a.kappa, b.kappa);
}

TEST(Metrics, TextReport) {
  auto r = eval_confusion(2, {40, 10, 5, 45});
  const std::string text = report_to_text(r);
  EXPECT_NE(text.find("oa = 0.85\n"), std::string::npos) << text;
  EXPECT_NE(text.find("n = 100\n"), std::string::npos);
  EXPECT_NE(text.find("confusion_row_1 = 40 10\n"), std::string::npos);
  for (std::size_t start = 0; start < text.size();) {
    const auto end = text.find('\n', start);
    EXPECT_NE(text.substr(start, end - start).find(" = "), std::string::npos);
    start = end + 1;
  }
}

TEST(Metrics, JsonReport) {
  auto r = eval_confusion(3, {8, 2, 0, 1, 9, 0, 0, 0, 0});
  auto j = nlohmann::json::parse(report_to_json(r));
  EXPECT_EQ(j["n"], 20);
  EXPECT_NEAR(j["oa"].get<double>(), r.oa, 1e-15);
  EXPECT_TRUE(j["per_class"][2].is_null());
  EXPECT_EQ(j["confusion"][1][1], 9);
}

TEST(Aggregate, SingleReport) {
  auto r = eval_confusion(2, {40, 10, 5, 45});
  std::vector<MetricsReport> rs = {r};
  auto a = aggregate(rs);
  EXPECT_EQ(a.runs, 1u);
  EXPECT_EQ(a.oa.mean, r.oa);
  EXPECT_EQ(a.oa.std, 0.0);
}

TEST(Aggregate, SampleStd) {
  std::vector<double> v = {0.9, 1.0};
  auto m = mean_std(v);
  EXPECT_NEAR(m.mean, 0.95, 1e-12);
  EXPECT_NEAR(m.std, std::sqrt(0.005), 1e-12);  // 0.0707...
}

TEST(Aggregate, IdenticalReportsHaveZeroStd) {
  auto r = eval_confusion(2, {40, 10, 5, 45});
  std::vector<MetricsReport> rs = {r, r, r};
  auto a = aggregate(rs);
  EXPECT_EQ(a.kappa.std, 0.0);
  EXPECT_NEAR(a.kappa.mean, 0.7, 1e-12);
}

TEST(Aggregate, EmptyFails) {
  EXPECT_THROW(aggregate(std::span<const MetricsReport>{}), Error);
  EXPECT_THROW(mean_std(std::span<const double>{}), Error);
}
