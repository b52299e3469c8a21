#include "sbart/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <json.hpp>

namespace sbart {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (int c = 1; c <= k_; ++c) s += at(c, c);
  return s;
}

ConfusionMatrix confusion(std::span<const int> actual, std::span<const int> predicted, int num_classes) {
  if (actual.size() != predicted.size()) throw UsageError("actual and predicted label counts differ");
  int K = num_classes;
  if (K == 0)
    for (std::size_t i = 0; i < actual.size(); ++i) K = std::max({K, actual[i], predicted[i]});
  ConfusionMatrix cm(K);
  for (std::size_t i = 0; i < actual.size(); ++i) ++cm.at(actual[i], predicted[i]);
  return cm;
}

Metric Metric::undefined() { return {std::numeric_limits<double>::quiet_NaN(), false}; }

namespace {

Metric ratio(double num, double den) {
  if (den == 0.0) return Metric::undefined();
  return {num / den, true};
}

}  // namespace

BinaryMetrics binary_metrics(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
  const double TP = static_cast<double>(tp), TN = static_cast<double>(tn);
  const double FP = static_cast<double>(fp), FN = static_cast<double>(fn);
  if (TP + TN + FP + FN == 0.0) throw UsageError("binary metrics need at least one sample");
  BinaryMetrics m;
  m.accuracy = {(TP + TN) / (TP + TN + FP + FN), true};
  m.sensitivity = ratio(TP, TP + FN);
  m.specificity = ratio(TN, TN + FP);
  m.precision = ratio(TP, TP + FP);
  if (m.precision.defined && m.sensitivity.defined)
    m.f1 = ratio(2.0 * m.precision.value * m.sensitivity.value, m.precision.value + m.sensitivity.value);
  else
    m.f1 = Metric::undefined();
  m.mcc = ratio(TP * TN - FP * FN, std::sqrt((TP + FN) * (TP + FP) * (TN + FN) * (TN + FP)));
  return m;
}

EvalReport multiclass_report(const ConfusionMatrix& cm) {
  EvalReport r;
  r.confusion = cm;
  const int K = cm.num_classes();
  const std::uint64_t total = cm.total();
  if (total == 0) throw UsageError("empty confusion matrix");
  r.overall_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);

  std::vector<double> support(K, 0.0);
  for (int c = 1; c <= K; ++c) {
    std::uint64_t tp = cm.at(c, c), fn = 0, fp = 0;
    for (int o = 1; o <= K; ++o) {
      if (o == c) continue;
      fn += cm.at(c, o);
      fp += cm.at(o, c);
    }
    const std::uint64_t tn = total - tp - fn - fp;
    r.per_class.push_back(binary_metrics(tp, tn, fp, fn));
    support[c - 1] = static_cast<double>(tp + fn);
  }

  auto average = [&](auto member, bool weighted, int* excluded) {
    double sum = 0.0, wsum = 0.0;
    for (int c = 0; c < K; ++c) {
      const Metric& m = r.per_class[c].*member;
      if (!m.defined) {
        if (excluded) ++*excluded;
        continue;
      }
      const double w = weighted ? support[c] : 1.0;
      sum += w * m.value;
      wsum += w;
    }
    return wsum > 0.0 ? sum / wsum : std::numeric_limits<double>::quiet_NaN();
  };
  for (bool weighted : {false, true}) {
    AveragedMetrics& a = weighted ? r.weighted : r.macro;
    a.accuracy = average(&BinaryMetrics::accuracy, weighted, nullptr);
    a.sensitivity = average(&BinaryMetrics::sensitivity, weighted, &a.excluded_sensitivity);
    a.specificity = average(&BinaryMetrics::specificity, weighted, &a.excluded_specificity);
    a.precision = average(&BinaryMetrics::precision, weighted, &a.excluded_precision);
    a.f1 = average(&BinaryMetrics::f1, weighted, &a.excluded_f1);
    a.mcc = average(&BinaryMetrics::mcc, weighted, &a.excluded_mcc);
  }
  return r;
}

double log_loss(const ClassProbs& probs, std::span<const int> actual) {
  if (actual.size() != probs.rows()) throw UsageError("log loss: label count does not match rows");
  if (actual.empty()) throw UsageError("log loss of an empty set");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const int y = actual[i];
    if (y < 1 || static_cast<std::size_t>(y) > probs.classes()) throw UsageError("log loss: label out of range");
    const double p = std::clamp(probs.probs(i, static_cast<std::size_t>(y - 1)), kLogLossClip, 1.0 - kLogLossClip);
    sum -= std::log(p);
  }
  return sum / static_cast<double>(actual.size());
}

namespace {

nlohmann::ordered_json metric_json(const Metric& m) {
  if (!m.defined) return nullptr;
  return m.value;
}

nlohmann::ordered_json averaged_json(const AveragedMetrics& a) {
  auto num = [](double v) -> nlohmann::ordered_json {
    if (std::isnan(v)) return nullptr;
    return v;
  };
  return {{"accuracy", num(a.accuracy)},
          {"sensitivity", num(a.sensitivity)},
          {"specificity", num(a.specificity)},
          {"precision", num(a.precision)},
          {"f1", num(a.f1)},
          {"mcc", num(a.mcc)},
          {"excluded",
           {{"sensitivity", a.excluded_sensitivity},
            {"specificity", a.excluded_specificity},
            {"precision", a.excluded_precision},
            {"f1", a.excluded_f1},
            {"mcc", a.excluded_mcc}}}};
}

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void write_report_json(std::ostream& os, const EvalReport& r, const std::string& model_name) {
  nlohmann::ordered_json j;
  j["model"] = model_name;
  const int K = r.confusion.num_classes();
  nlohmann::ordered_json cm = nlohmann::ordered_json::array();
  for (int a = 1; a <= K; ++a) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int p = 1; p <= K; ++p) row.push_back(r.confusion.at(a, p));
    cm.push_back(row);
  }
  j["confusion"] = cm;
  j["overall_accuracy"] = r.overall_accuracy;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const BinaryMetrics& m = r.per_class[c];
    per.push_back({{"class", c + 1},
                   {"accuracy", metric_json(m.accuracy)},
                   {"sensitivity", metric_json(m.sensitivity)},
                   {"specificity", metric_json(m.specificity)},
                   {"precision", metric_json(m.precision)},
                   {"f1", metric_json(m.f1)},
                   {"mcc", metric_json(m.mcc)}});
  }
  j["per_class"] = per;
  j["macro"] = averaged_json(r.macro);
  j["weighted"] = averaged_json(r.weighted);
  if (r.log_loss) j["log_loss"] = *r.log_loss;
  os << j.dump(2) << '\n';
}

void write_summary_csv(std::ostream& os, std::span<const std::pair<std::string, EvalReport>> rows) {
  os << "model,accuracy,mcc,sensitivity,specificity,f1\n";
  for (const auto& [name, r] : rows)
    os << name << ',' << fmt(r.overall_accuracy) << ',' << fmt(r.macro.mcc) << ',' << fmt(r.macro.sensitivity)
       << ',' << fmt(r.macro.specificity) << ',' << fmt(r.macro.f1) << '\n';
}

}  // namespace sbart
