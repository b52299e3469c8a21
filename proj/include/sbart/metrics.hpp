#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbart/sampler.hpp"

namespace sbart {

// Rows are actual classes, columns predicted; labels are 1..K.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0)
      : k_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

  int num_classes() const noexcept { return k_; }
  std::uint64_t at(int actual, int predicted) const { return counts_[idx(actual, predicted)]; }
  std::uint64_t& at(int actual, int predicted) { return counts_[idx(actual, predicted)]; }
  std::uint64_t total() const;
  std::uint64_t trace() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t idx(int a, int p) const {
    if (a < 1 || a > k_ || p < 1 || p > k_) throw UsageError("class label outside 1.." + std::to_string(k_));
    return static_cast<std::size_t>(a - 1) * k_ + (p - 1);
  }
  int k_;
  std::vector<std::uint64_t> counts_;
};

// num_classes = 0 takes K from the largest label seen.
ConfusionMatrix confusion(std::span<const int> actual, std::span<const int> predicted, int num_classes = 0);

// A ratio whose denominator was zero is flagged undefined (value NaN) and
// left out of macro averages.
struct Metric {
  double value = 0.0;
  bool defined = true;
  static Metric undefined();
};

struct BinaryMetrics {
  Metric accuracy, sensitivity, specificity, precision, f1, mcc;
};

BinaryMetrics binary_metrics(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn);

struct AveragedMetrics {
  double accuracy = 0.0, sensitivity = 0.0, specificity = 0.0, precision = 0.0, f1 = 0.0, mcc = 0.0;
  // Per-class values left out of each average because they were undefined.
  int excluded_sensitivity = 0, excluded_specificity = 0, excluded_precision = 0, excluded_f1 = 0, excluded_mcc = 0;
};

struct EvalReport {
  ConfusionMatrix confusion;
  std::vector<BinaryMetrics> per_class;  // one-vs-rest, class 1 first
  AveragedMetrics macro;                 // unweighted mean over classes
  AveragedMetrics weighted;              // weighted by actual class support
  double overall_accuracy = 0.0;         // trace / total
  std::optional<double> log_loss;
};

EvalReport multiclass_report(const ConfusionMatrix& cm);

inline constexpr double kLogLossClip = 1e-15;
double log_loss(const ClassProbs& probs, std::span<const int> actual);

void write_report_json(std::ostream& os, const EvalReport& r, const std::string& model_name = "BART");
// One row per model: model,accuracy,mcc,sensitivity,specificity,f1 with macro
// averages and overall accuracy.
void write_summary_csv(std::ostream& os, std::span<const std::pair<std::string, EvalReport>> rows);

}  // namespace sbart
