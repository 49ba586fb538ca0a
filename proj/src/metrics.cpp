#include "metrics.hpp"

#include <cmath>
#include <limits>
#include "json.hpp"
#include <sstream>

#include "error.hpp"

namespace mhsi {

MetricsReport report_from_confusion(std::size_t classes, std::vector<std::uint64_t> confusion) {
  if (confusion.size() != classes * classes) fail(ErrorCode::kShape, "metrics: confusion must be K x K");
  MetricsReport r;
  r.classes = classes;
  r.confusion = std::move(confusion);
  std::vector<std::uint64_t> row(classes, 0), col(classes, 0);
  std::uint64_t trace = 0;
  for (std::size_t i = 0; i < classes; ++i) {
    for (std::size_t j = 0; j < classes; ++j) {
      const auto v = r.confusion[i * classes + j];
      row[i] += v;
      col[j] += v;
      r.n += v;
    }
    trace += r.confusion[i * classes + i];
  }
  if (r.n == 0) fail(ErrorCode::kData, "metrics: empty confusion matrix");

  const double n = static_cast<double>(r.n);
  r.oa = static_cast<double>(trace) / n;
  double pe = 0.0;
  for (std::size_t i = 0; i < classes; ++i) pe += static_cast<double>(row[i]) * static_cast<double>(col[i]);
  pe /= n * n;
  r.kappa = pe >= 1.0 ? (trace == r.n ? 1.0 : 0.0) : (r.oa - pe) / (1.0 - pe);

  r.per_class.assign(classes, std::numeric_limits<double>::quiet_NaN());
  double recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < classes; ++i) {
    if (row[i] == 0) {
      r.warnings.push_back("class " + std::to_string(i + 1) + " absent from mask; excluded from AA");
      continue;
    }
    r.per_class[i] = static_cast<double>(r.confusion[i * classes + i]) / static_cast<double>(row[i]);
    recall_sum += r.per_class[i];
    ++present;
  }
  r.aa = recall_sum / static_cast<double>(present);
  return r;
}

MetricsReport evaluate(std::span<const std::uint16_t> predicted, std::span<const std::uint16_t> labels,
                       std::span<const std::uint8_t> mask, std::size_t classes) {
  if (predicted.size() != labels.size() || mask.size() != labels.size()) {
    fail(ErrorCode::kShape, "evaluate: prediction, label and mask rasters differ in size");
  }
  std::vector<std::uint64_t> confusion(classes * classes, 0);
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask[i]) continue;
    const auto t = labels[i];
    const auto p = predicted[i];
    if (t == 0 || t > classes || p == 0 || p > classes) {
      fail(ErrorCode::kData, "evaluate: masked pixel " + std::to_string(i) + " has label " + std::to_string(t) +
                                 " / prediction " + std::to_string(p) + " outside 1.." + std::to_string(classes));
    }
    ++confusion[(t - 1) * classes + (p - 1)];
    ++count;
  }
  if (count == 0) fail(ErrorCode::kData, "evaluate: mask selects no pixels");
  return report_from_confusion(classes, std::move(confusion));
}

std::string report_to_text(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "n = " << r.n << '\n';
  os << "oa = " << r.oa << '\n';
  os << "aa = " << r.aa << '\n';
  os << "kappa = " << r.kappa << '\n';
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    os << "class_" << (k + 1) << "_accuracy = ";
    if (std::isnan(r.per_class[k])) {
      os << "nan";
    } else {
      os << r.per_class[k];
    }
    os << '\n';
  }
  for (std::size_t i = 0; i < r.classes; ++i) {
    os << "confusion_row_" << (i + 1) << " =";
    for (std::size_t j = 0; j < r.classes; ++j) os << ' ' << r.confusion[i * r.classes + j];
    os << '\n';
  }
  return os.str();
}

std::string report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["n"] = r.n;
  j["oa"] = r.oa;
  j["aa"] = r.aa;
  j["kappa"] = r.kappa;
  nlohmann::json per = nlohmann::json::array();
  for (double v : r.per_class) per.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  j["per_class"] = per;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < r.classes; ++i) {
    rows.push_back(std::vector<std::uint64_t>(r.confusion.begin() + static_cast<std::ptrdiff_t>(i * r.classes),
                                              r.confusion.begin() + static_cast<std::ptrdiff_t>((i + 1) * r.classes)));
  }
  j["confusion"] = rows;
  j["warnings"] = r.warnings;
  return j.dump(2);
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::kUsage, "aggregate: no values");
  // Shifted by the first value, so identical inputs give exactly std 0.
  const double ref = values[0];
  double shift = 0.0;
  for (double v : values) shift += v - ref;
  shift /= static_cast<double>(values.size());
  MeanStd m;
  m.mean = ref + shift;
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - ref - shift) * (v - ref - shift);
    m.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return m;
}

AggregateReport aggregate(std::span<const MetricsReport> reports) {
  if (reports.empty()) fail(ErrorCode::kUsage, "aggregate: no reports");
  std::vector<double> oa, aa, kappa;
  for (const auto& r : reports) {
    oa.push_back(r.oa);
    aa.push_back(r.aa);
    kappa.push_back(r.kappa);
  }
  return {reports.size(), mean_std(oa), mean_std(aa), mean_std(kappa)};
}

}  // namespace mhsi
