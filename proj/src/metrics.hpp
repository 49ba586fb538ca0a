#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mhsi {

// Confusion-matrix evaluation. Rows are true classes, columns predictions,
// both 1..K stored at index k-1.
struct MetricsReport {
  std::size_t classes = 0;
  std::vector<std::uint64_t> confusion;  // classes x classes
  std::uint64_t n = 0;
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  // Recall per class; NaN for classes absent from the mask.
  std::vector<double> per_class;
  std::vector<std::string> warnings;

  std::uint64_t at(std::size_t true_class, std::size_t predicted) const {
    return confusion[(true_class - 1) * classes + (predicted - 1)];
  }
};

// Derives OA, AA (over classes present), and Cohen's kappa. When chance
// agreement is 1 kappa is 1 for a perfect diagonal and 0 otherwise.
MetricsReport report_from_confusion(std::size_t classes, std::vector<std::uint64_t> confusion);

MetricsReport evaluate(std::span<const std::uint16_t> predicted, std::span<const std::uint16_t> labels,
                       std::span<const std::uint8_t> mask, std::size_t classes);

// One "name = value" per line.
std::string report_to_text(const MetricsReport& report);
std::string report_to_json(const MetricsReport& report);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct AggregateReport {
  std::size_t runs = 0;
  MeanStd oa;
  MeanStd aa;
  MeanStd kappa;
};

// Sample mean and sample standard deviation (n - 1 divisor; 0 for one run).
MeanStd mean_std(std::span<const double> values);
AggregateReport aggregate(std::span<const MetricsReport> reports);

}  // namespace mhsi
