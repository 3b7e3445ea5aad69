#pragma once

// Classification metrics for the four-class problem and its binary
// failure-vs-normal reduction.

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dcprophet/trace_model.hpp"

namespace dcprophet::eval {

/// counts[predicted][actual].
class ConfusionMatrix {
 public:
  std::uint64_t at(FailureType predicted, FailureType actual) const {
    return counts_[to_label(predicted)][to_label(actual)];
  }
  void add(FailureType predicted, FailureType actual) {
    ++counts_[to_label(predicted)][to_label(actual)];
  }
  std::uint64_t total() const;
  std::uint64_t predicted_total(FailureType c) const;
  std::uint64_t actual_total(FailureType c) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::array<std::array<std::uint64_t, kClassCount>, kClassCount> counts_{};
};

/// Throws std::invalid_argument on a length mismatch.
ConfusionMatrix confusion(std::span<const FailureType> predicted,
                          std::span<const FailureType> actual);

/// nullopt marks an undefined rate (zero denominator).
struct PrecisionRecall {
  std::optional<double> precision;
  std::optional<double> recall;
};

PrecisionRecall precision_recall(const ConfusionMatrix& cm, FailureType c);

/// Pools IR/SR/FD into one positive class.
PrecisionRecall binary_precision_recall(const ConfusionMatrix& cm);

/// (1 + b^2) p r / (b^2 p + r); 0 when p = r = 0.
double f_beta(double precision, double recall, double beta = 3.0);

/// F-beta with undefined precision or recall counted as 0. nullopt only
/// when both are undefined.
std::optional<double> f_beta(const PrecisionRecall& pr, double beta = 3.0);

/// Mann-Whitney AUC: P(s+ > s-) + 1/2 P(s+ = s-). Throws UndefinedAucError
/// unless both classes occur.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // predict positive when score >= threshold
};

/// One point per distinct score, descending thresholds, starting at (0, 0).
std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                std::span<const std::uint8_t> positive);
void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve);

struct LatencyStats {
  std::size_t calls = 0;
  double mean_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};

/// Times `repetitions` calls of predict(instance), cycling through the
/// instances, after one untimed warm-up pass over all of them.
LatencyStats measure_latency(const std::function<void(std::span<const double>)>& predict,
                             std::span<const std::vector<double>> instances,
                             std::size_t repetitions);

struct MetricsReport {
  ConfusionMatrix confusion;
  std::array<PrecisionRecall, kClassCount> per_class;
  PrecisionRecall binary;
  std::optional<double> binary_f3;
  std::optional<double> macro_f3;  // mean over failure classes present in the actuals
  std::optional<double> auc;       // composite score vs binarized labels
  std::optional<LatencyStats> latency;
};

/// `scores` may be empty (no AUC). AUC is left unset when only one class
/// occurs.
MetricsReport make_report(std::span<const FailureType> predicted,
                          std::span<const FailureType> actual, std::span<const double> scores);

void write_report_text(std::ostream& out, const MetricsReport& report);
/// Flat key=value lines; undefined values are written as "undefined".
void write_report_kv(std::ostream& out, const MetricsReport& report);
void write_latency_kv(std::ostream& out, const LatencyStats& latency);

}  // namespace dcprophet::eval
