#pragma once

// Partial autocorrelation analysis and construction of labeled instances
// (y, x) where x packs average and peak usage of the L intervals before the
// target interval.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcprophet/ingestion.hpp"
#include "dcprophet/labeling.hpp"
#include "dcprophet/matrix.hpp"
#include "dcprophet/trace_model.hpp"

namespace dcprophet::features {

/// Partial autocorrelations for lags 1..max_lag via the Durbin-Levinson
/// recursion over the biased sample autocovariances of the demeaned series.
/// Throws ZeroVarianceError on a constant series and InsufficientDataError
/// when series.size() <= max_lag + 1.
std::vector<double> pacf(std::span<const double> series, std::size_t max_lag);

/// 95% two-sided significance band for a PACF estimated from n samples.
double significance_band(std::size_t n);

struct PacfResult {
  MachineId machine = 0;
  ResourceKind resource = ResourceKind::CpuUsage;
  std::vector<double> pacf;  // lag k at index k-1
  std::size_t n_effective = 0;

  double band() const { return significance_band(n_effective); }
};

/// PACF of every machine's average-usage series per resource. The series of
/// a machine is its present, non-downtime intervals in time order. Pairs
/// that are constant or too short are skipped.
std::vector<PacfResult> machine_pacf(const ingest::SeriesMap& series,
                                     const labeling::TrackMap* tracks, std::size_t max_lag,
                                     std::size_t threads = 1);

/// lag -> number of (machine, resource) pairs with |pacf(lag)| above the band.
std::map<std::size_t, std::size_t> significant_lag_histogram(std::span<const PacfResult> results);

enum class ValueKind : std::uint8_t { Average = 0, Peak = 1 };

struct FeatureSlot {
  ValueKind kind = ValueKind::Average;
  ResourceKind resource = ResourceKind::CpuUsage;
  std::size_t lag = 1;  // 1..L, interval tau - lag

  bool operator==(const FeatureSlot&) const = default;
};

/// Index layout: kind-major, then resource, then lag.
/// index = kind * (R * L) + resource * L + (lag - 1).
class FeatureConfig {
 public:
  explicit FeatureConfig(std::size_t lags = 6);

  std::size_t lags() const { return lags_; }
  std::size_t dimension() const { return 2 * kResourceCount * lags_; }
  std::size_t index(const FeatureSlot& slot) const;
  FeatureSlot slot(std::size_t index) const;
  std::string name(std::size_t index) const;  // e.g. "peak_disk_lag3"

  nlohmann::json to_json() const;
  static FeatureConfig from_json(const nlohmann::json& j);

  bool operator==(const FeatureConfig&) const = default;

 private:
  std::size_t lags_;
};

struct Instance {
  FailureType y = FailureType::Normal;
  std::vector<double> x;
  MachineId machine = 0;
  std::size_t target = 0;  // tau

  bool operator==(const Instance&) const = default;
};

/// Packs intervals tau-1 .. tau-L. Absent when tau < L or any source interval
/// is absent or downtime-flagged.
std::optional<Instance> build_instance(const ingest::MachineSeries& series,
                                       const labeling::LabelTrack& track, std::size_t tau,
                                       const FeatureConfig& cfg);

struct DatasetConfig {
  std::size_t normal_sample_count = 50'000;
  std::uint64_t rng_seed = 0;
  double train_fraction = 0.8;

  void validate() const;
};

struct Dataset {
  std::vector<Instance> train;
  std::vector<Instance> test;
  std::vector<std::string> warnings;
};

/// Every buildable failure instance plus a seeded uniform sample of buildable
/// normal instances, split per class into train/test. Normal candidates are
/// targets that are neither labeled nor downtime-flagged. Both halves are
/// ordered by (machine, tau).
Dataset build_dataset(const ingest::SeriesMap& series, const labeling::TrackMap& tracks,
                      const FeatureConfig& cfg, const DatasetConfig& dcfg,
                      std::size_t threads = 1);

/// Learner view of a set of instances.
struct LabeledData {
  FeatureMatrix x;
  std::vector<FailureType> y;

  std::size_t size() const { return y.size(); }
};

LabeledData to_labeled(std::span<const Instance> instances);

/// dataset.csv: header y,f0,...,f{d-1}.
void write_dataset(std::ostream& out, std::span<const Instance> instances, std::size_t dimension);
std::vector<Instance> read_dataset(std::istream& in);

/// Sidecar keys file (machine_id,interval) aligned row-by-row with a dataset.
void write_keys(std::ostream& out, std::span<const Instance> instances);
void read_keys(std::istream& in, std::vector<Instance>& instances);

}  // namespace dcprophet::features
