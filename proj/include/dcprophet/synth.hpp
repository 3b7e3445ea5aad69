#pragma once

// Seeded generator of small traces with the same structure as the real one:
// power-law failure counts per machine, downtimes clustered around 16 minutes
// and 2 hours plus permanent removals, AR(1) usage, a few degenerate
// machines, and an optional 30-minute usage ramp before a fraction of the
// failures.

#include <array>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dcprophet/trace_model.hpp"

namespace dcprophet::synth {

struct SynthConfig {
  std::size_t machines = 500;
  double horizon_days = 7.0;
  double failing_fraction = 0.4;        // machines with at least one failure
  double power_law_exponent = 1.8;      // P(k failures) ~ k^-exponent, k >= 1
  std::size_t max_failures_per_machine = 30;
  /// Relative weights of IR, SR, FD draws.
  std::array<double, 3> type_weights{5894.0, 2783.0, 94.0};
  double ir_median_minutes = 16.0;
  double sr_median_minutes = 120.0;
  double duration_log_sigma = 0.25;
  double signature_strength = 0.9;  // fraction of failures preceded by a ramp
  double ramp_amplitude = 0.3;
  std::array<double, 6> ar_coefficients{0.7, 0.6, 0.8, 0.65, 0.75, 0.5};
  std::array<double, 6> usage_means{0.35, 0.2, 0.4, 0.45, 0.3, 0.25};
  double innovation_sd = 0.05;
  std::size_t degenerate_machines = 2;
  std::size_t feature_lags = 6;  // clean intervals kept before every failure
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct TruthLabel {
  MachineId machine = 0;
  std::size_t interval = 0;
  FailureType y = FailureType::Normal;
};

/// Ground truth kept alongside the CSV output.
struct SynthSummary {
  std::size_t machines = 0;
  std::size_t intervals = 0;
  std::size_t usage_rows = 0;
  std::vector<TruthLabel> truth;
  std::vector<FailureEvent> failures;
  std::vector<MachineId> degenerate;
  std::size_t heralded = 0;
};

/// Streams machine_events.csv, resource_usage.csv and truth_labels.csv.
/// Output bytes depend only on the config. Throws GenerationError when the
/// horizon cannot hold the requested failures.
SynthSummary generate(const SynthConfig& config, std::ostream& events, std::ostream& usage,
                      std::ostream& truth);

struct SynthFiles {
  std::string machine_events;
  std::string resource_usage;
  std::string truth_labels;
  SynthSummary summary;
};

SynthFiles generate(const SynthConfig& config);

/// End of the generated trace.
Timestamp horizon(const SynthConfig& config);

}  // namespace dcprophet::synth
