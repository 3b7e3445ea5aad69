#pragma once

// Readers for the native machine-event and resource-usage CSV schemas, and
// aggregation of raw usage records into dense per-machine interval series.
//
//   machine_events.csv : time_us,machine_id,event        (event 0=Add 1=Remove 2=Update)
//   resource_usage.csv : start_us,end_us,machine_id,mean_{cpu,diskio,disk,mem,cache,mai},
//                        max_{cpu,diskio,disk,mem,cache,mai}

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "dcprophet/trace_model.hpp"

namespace dcprophet::ingest {

inline constexpr std::string_view kEventsHeader = "time_us,machine_id,event";
inline constexpr std::string_view kUsageHeader =
    "start_us,end_us,machine_id,mean_cpu,mean_diskio,mean_disk,mean_mem,mean_cache,mean_mai,"
    "max_cpu,max_diskio,max_disk,max_mem,max_cache,max_mai";

/// One raw usage row before interval aggregation.
struct UsageRecord {
  MachineId machine = 0;
  Timestamp start;
  Timestamp end;
  Usage mean{};
  Usage max{};

  bool operator==(const UsageRecord&) const = default;
};

struct ClampStats {
  std::uint64_t values = 0;  // individual fields moved into [0, 1]
  std::uint64_t rows = 0;    // rows with at least one clamped field
};

struct UsageParseResult {
  std::vector<UsageRecord> records;
  ClampStats clamps;
};

/// Parses machine_events.csv. Result is sorted by (machine, time); ties keep
/// file order. Throws ParseError with the offending line.
std::vector<MachineEvent> parse_machine_events(std::istream& in);

/// Parses resource_usage.csv, clamping out-of-range usage into [0, 1].
/// Rows with start >= end or mean > max (after clamping) are rejected.
UsageParseResult parse_usage_records(std::istream& in);

/// Interval series of one machine over the whole trace horizon.
struct MachineSeries {
  MachineId machine = 0;
  std::vector<IntervalUsage> intervals;  // size T, index == interval
  std::vector<bool> present;             // true where at least one record overlapped

  std::size_t size() const { return intervals.size(); }
};

using SeriesMap = std::map<MachineId, MachineSeries>;

/// Buckets records into `interval`-long bins over [0, horizon). Bin averages
/// are overlap-weighted means of record means, bin peaks the max of record
/// maxima. The result does not depend on record order.
/// Throws std::invalid_argument if a record ends after `horizon`.
SeriesMap aggregate_intervals(std::span<const UsageRecord> records, Timestamp horizon,
                              Micros interval = kDefaultInterval);

/// Interval store: present intervals only, preceded by a `# horizon_us=...`
/// line so absent bins can be reconstructed.
void write_interval_store(std::ostream& out, const SeriesMap& series, Timestamp horizon,
                          Micros interval = kDefaultInterval);

struct IntervalStore {
  Timestamp horizon;
  Micros interval = kDefaultInterval;
  SeriesMap series;
};

IntervalStore read_interval_store(std::istream& in);

void write_machine_events(std::ostream& out, std::span<const MachineEvent> events);
void write_usage_records(std::ostream& out, std::span<const UsageRecord> records);

}  // namespace dcprophet::ingest
