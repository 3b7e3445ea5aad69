#include "dcprophet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dcprophet/error.hpp"
#include "dcprophet/ingestion.hpp"
#include "dcprophet/text_io.hpp"

namespace dcprophet::synth {
namespace {

constexpr std::int64_t kLen = kDefaultInterval.count();
constexpr std::int64_t kSecond = 1'000'000;
constexpr std::size_t kRampIntervals = 6;
constexpr double kSlowThresholdMinutes = 30.0;
constexpr std::size_t kDegenerateMinFailures = 101;
constexpr std::size_t kDegenerateMaxFailures = 165;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 1e4) / 1e4; }

struct Planned {
  FailureType type = FailureType::ImmediateReboot;
  std::int64_t offset = 0;                // remove time within its interval
  std::optional<std::int64_t> duration;   // absent for FD
  bool heralded = false;
  std::size_t remove_bin = 0;

  // Intervals from the remove interval to the one holding the add.
  std::size_t span() const {
    return duration ? static_cast<std::size_t>((offset + *duration) / kLen) : 0;
  }
};

std::int64_t draw_duration(FailureType type, const SynthConfig& c, std::mt19937_64& rng) {
  const bool slow = type == FailureType::SlowReboot;
  std::lognormal_distribution<double> dist(
      std::log(slow ? c.sr_median_minutes : c.ir_median_minutes), c.duration_log_sigma);
  double minutes = dist(rng);
  for (int tries = 0; tries < 1000 && (minutes < kSlowThresholdMinutes) == slow; ++tries) {
    minutes = dist(rng);
  }
  minutes = slow ? std::max(minutes, kSlowThresholdMinutes)
                 : std::min(minutes, kSlowThresholdMinutes - 1.0 / 60.0);
  return std::max<std::int64_t>(1, std::llround(minutes * 60.0)) * kSecond;
}

/// Assigns remove intervals, keeping `gap` clean intervals after each add and
/// before the first remove, and spreading the leftover intervals at random.
void place(std::vector<Planned>& plan, std::size_t bins, std::size_t gap, MachineId machine,
           std::mt19937_64& rng) {
  if (plan.empty()) return;
  std::size_t required = gap + 1;
  for (std::size_t i = 0; i + 1 < plan.size(); ++i) required += plan[i].span() + gap + 1;
  if (plan.back().duration) required += plan.back().span();
  if (required > bins) {
    throw GenerationError("machine " + std::to_string(machine) + ": " +
                          std::to_string(plan.size()) + " failures need " +
                          std::to_string(required) + " intervals but the horizon has " +
                          std::to_string(bins));
  }
  const std::size_t slack = bins - required;
  std::uniform_int_distribution<std::size_t> cut(0, slack);
  std::vector<std::size_t> cuts(plan.size());
  for (auto& c : cuts) c = cut(rng);
  std::sort(cuts.begin(), cuts.end());

  std::size_t at = gap;
  std::size_t used = 0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    at += cuts[i] - used;
    used = cuts[i];
    plan[i].remove_bin = at;
    at += plan[i].span() + gap + 1;
  }
}

void append_usage(std::string& buf, std::int64_t start, std::int64_t end, MachineId id,
                  const Usage& avg, const Usage& peak) {
  buf += std::to_string(start) + ',' + std::to_string(end) + ',' + std::to_string(id);
  for (const double v : avg) {
    buf += ',';
    text::append_double(buf, v);
  }
  for (const double v : peak) {
    buf += ',';
    text::append_double(buf, v);
  }
  buf += '\n';
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("synth config: " + what); };
  if (machines == 0) fail("machines must be positive");
  if (!(horizon_days > 0.0)) fail("horizon_days must be positive");
  if (!(failing_fraction >= 0.0 && failing_fraction <= 1.0)) fail("failing_fraction outside [0, 1]");
  if (!(power_law_exponent > 0.0)) fail("power_law_exponent must be positive");
  if (max_failures_per_machine == 0) fail("max_failures_per_machine must be positive");
  for (const double w : type_weights) {
    if (!(w > 0.0)) fail("type weights must be positive");
  }
  if (!(ir_median_minutes > 0.0 && ir_median_minutes < kSlowThresholdMinutes)) {
    fail("ir_median_minutes must lie in (0, 30)");
  }
  if (!(sr_median_minutes >= kSlowThresholdMinutes)) fail("sr_median_minutes must be at least 30");
  if (!(duration_log_sigma > 0.0)) fail("duration_log_sigma must be positive");
  if (!(signature_strength >= 0.0 && signature_strength <= 1.0)) {
    fail("signature_strength outside [0, 1]");
  }
  if (!(ramp_amplitude >= 0.0)) fail("ramp_amplitude must be non-negative");
  for (const double a : ar_coefficients) {
    if (!(a > -1.0 && a < 1.0)) fail("AR coefficients must lie in (-1, 1)");
  }
  for (const double m : usage_means) {
    if (!(m >= 0.0 && m <= 1.0)) fail("usage means outside [0, 1]");
  }
  if (!(innovation_sd >= 0.0)) fail("innovation_sd must be non-negative");
  if (degenerate_machines > machines) fail("more degenerate machines than machines");
  if (feature_lags == 0) fail("feature_lags must be positive");
}

Timestamp horizon(const SynthConfig& config) {
  const auto bins = static_cast<std::uint64_t>(std::llround(config.horizon_days * 288.0));
  return Timestamp{bins * static_cast<std::uint64_t>(kLen)};
}

SynthSummary generate(const SynthConfig& config, std::ostream& events_out,
                      std::ostream& usage_out, std::ostream& truth_out) {
  config.validate();
  const std::size_t bins = horizon(config).micros / static_cast<std::uint64_t>(kLen);
  if (bins <= config.feature_lags + 1) throw GenerationError("horizon shorter than one feature window");

  std::vector<double> count_weights(config.max_failures_per_machine);
  for (std::size_t k = 1; k <= count_weights.size(); ++k) {
    count_weights[k - 1] = std::pow(static_cast<double>(k), -config.power_law_exponent);
  }
  std::discrete_distribution<std::size_t> count_dist(count_weights.begin(), count_weights.end());
  std::discrete_distribution<int> type_dist(config.type_weights.begin(), config.type_weights.end());

  SynthSummary summary;
  summary.machines = config.machines;
  summary.intervals = bins;

  events_out << ingest::kEventsHeader << '\n';
  usage_out << ingest::kUsageHeader << '\n';
  std::vector<TruthLabel> truth;

  for (std::size_t m = 0; m < config.machines; ++m) {
    const MachineId id = m + 1;
    std::mt19937_64 rng(mix(config.rng_seed ^ mix(id)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> offset_dist(0, kLen / kSecond - 1);
    const bool degenerate = m < config.degenerate_machines;

    std::vector<Planned> plan;
    if (degenerate) {
      std::uniform_int_distribution<std::size_t> n(kDegenerateMinFailures, kDegenerateMaxFailures);
      plan.resize(n(rng));
      for (auto& p : plan) {
        p.offset = offset_dist(rng) * kSecond;
        p.duration = draw_duration(FailureType::ImmediateReboot, config, rng);
      }
      place(plan, bins, 1, id, rng);
      summary.degenerate.push_back(id);
    } else if (unit(rng) < config.failing_fraction) {
      const std::size_t k = count_dist(rng) + 1;
      for (std::size_t i = 0; i < k; ++i) {
        Planned p;
        p.type = static_cast<FailureType>(type_dist(rng) + 1);
        p.offset = offset_dist(rng) * kSecond;
        if (p.type != FailureType::ForcibleDecommission) p.duration = draw_duration(p.type, config, rng);
        p.heralded = unit(rng) < config.signature_strength;
        plan.push_back(p);
        if (p.type == FailureType::ForcibleDecommission) break;
      }
      place(plan, bins, config.feature_lags, id, rng);
    }

    // Events, failures, truth, and the ramp added to each interval's average.
    std::vector<MachineEvent> events{{id, Timestamp{0}, MachineEventKind::Add}};
    std::vector<Usage> ramp(bins, Usage{});
    struct Down {
      std::int64_t from, to;
    };
    std::vector<Down> down;
    for (const auto& p : plan) {
      const std::int64_t remove = static_cast<std::int64_t>(p.remove_bin) * kLen + p.offset;
      events.push_back({id, Timestamp{static_cast<std::uint64_t>(remove)}, MachineEventKind::Remove});
      const Timestamp remove_ts{static_cast<std::uint64_t>(remove)};
      if (p.duration) {
        const std::int64_t add = remove + *p.duration;
        events.push_back({id, Timestamp{static_cast<std::uint64_t>(add)}, MachineEventKind::Add});
        summary.failures.push_back(FailureEvent::repaired(
            id, remove_ts, Timestamp{static_cast<std::uint64_t>(add)}, p.type));
        down.push_back({remove, add});
      } else {
        summary.failures.push_back(FailureEvent::decommissioned(id, remove_ts));
        down.push_back({remove, static_cast<std::int64_t>(bins) * kLen});
      }
      truth.push_back({id, p.remove_bin, p.type});
      if (!p.heralded) continue;
      ++summary.heralded;
      std::array<std::size_t, 2> targets{};
      switch (p.type) {
        case FailureType::SlowReboot: targets = {1, 2}; break;
        case FailureType::ForcibleDecommission: targets = {4, 5}; break;
        default: targets = {0, 3}; break;
      }
      for (std::size_t j = 1; j <= kRampIntervals && j <= p.remove_bin; ++j) {
        const double lift = config.ramp_amplitude * static_cast<double>(kRampIntervals + 1 - j) /
                            static_cast<double>(kRampIntervals);
        for (const std::size_t r : targets) ramp[p.remove_bin - j][r] += lift;
      }
    }

    std::string event_buf;
    for (const auto& e : events) {
      event_buf += std::to_string(e.time.micros) + ',' + std::to_string(id) + ',' +
                   std::to_string(static_cast<int>(e.kind)) + '\n';
    }
    events_out << event_buf;

    // AR(1) per resource, advanced through downtime as well.
    Usage state;
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t r = 0; r < kResourceCount; ++r) {
      const double phi = config.ar_coefficients[r];
      state[r] = config.usage_means[r] +
                 config.innovation_sd / std::sqrt(1.0 - phi * phi) * noise(rng);
    }
    std::size_t next_down = 0;
    std::string usage_buf;
    for (std::size_t t = 0; t < bins; ++t) {
      Usage avg{}, peak{};
      for (std::size_t r = 0; r < kResourceCount; ++r) {
        const double mu = config.usage_means[r];
        if (t > 0) {
          state[r] = mu + config.ar_coefficients[r] * (state[r] - mu) + config.innovation_sd * noise(rng);
        }
        const double spread = 0.05 + 0.05 * std::abs(noise(rng));
        if (!degenerate) {
          avg[r] = quantize(state[r] + ramp[t][r]);
          peak[r] = quantize(std::max(avg[r], std::min(1.0, avg[r] + spread)));
        }
      }

      // Up-time pieces of [t*len, (t+1)*len) outside every downtime span.
      const std::int64_t lo = static_cast<std::int64_t>(t) * kLen, hi = lo + kLen;
      while (next_down < down.size() && down[next_down].to <= lo) ++next_down;
      std::int64_t cursor = lo;
      for (std::size_t d = next_down; d < down.size() && down[d].from < hi && cursor < hi; ++d) {
        if (down[d].from > cursor) {
          append_usage(usage_buf, cursor, down[d].from, id, avg, peak);
          ++summary.usage_rows;
        }
        cursor = std::max(cursor, down[d].to);
      }
      if (cursor < hi) {
        append_usage(usage_buf, cursor, hi, id, avg, peak);
        ++summary.usage_rows;
      }
    }
    usage_out << usage_buf;
  }

  truth_out << "machine_id,interval,y\n";
  for (const auto& t : truth) {
    truth_out << t.machine << ',' << t.interval << ',' << to_label(t.y) << '\n';
  }
  summary.truth = std::move(truth);
  return summary;
}

SynthFiles generate(const SynthConfig& config) {
  std::ostringstream events, usage, truth;
  SynthFiles files;
  files.summary = generate(config, events, usage, truth);
  files.machine_events = std::move(events).str();
  files.resource_usage = std::move(usage).str();
  files.truth_labels = std::move(truth).str();
  return files;
}

}  // namespace dcprophet::synth
