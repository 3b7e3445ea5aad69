#pragma once

// Pairs REMOVE/ADD events into failures, categorizes them by downtime,
// detects degenerate machines and labels every (machine, interval).

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <vector>

#include "dcprophet/ingestion.hpp"
#include "dcprophet/trace_model.hpp"

namespace dcprophet::labeling {

struct LabelingConfig {
  Micros ir_max_downtime = std::chrono::minutes(30);
  std::size_t degenerate_min_failures = 100;  // strictly more than this many
  Timestamp trace_end;
  Micros interval = kDefaultInterval;

  void validate() const;
};

struct PairingResult {
  std::vector<FailureEvent> failures;  // sorted by (machine, remove time)
  std::uint64_t dropped_removes = 0;   // REMOVE while the machine was already removed
};

/// Each REMOVE is closed by the next ADD of the same machine before
/// cfg.trace_end; an unclosed REMOVE becomes a decommission. A second REMOVE
/// before the ADD is dropped and counted. UPDATE events are ignored.
PairingResult pair_failures(std::span<const MachineEvent> events, const LabelingConfig& cfg);

/// < ir_max_downtime -> ImmediateReboot, otherwise SlowReboot, absent ->
/// ForcibleDecommission.
FailureType categorize(std::optional<Micros> duration, const LabelingConfig& cfg);

/// Machines failing more than cfg.degenerate_min_failures times whose present
/// intervals are all zero (average and peak).
std::set<MachineId> detect_degenerate_machines(const ingest::SeriesMap& series,
                                               std::span<const FailureEvent> failures,
                                               const LabelingConfig& cfg);

struct LabelTrack {
  MachineId machine = 0;
  std::vector<FailureType> labels;  // y_t
  std::vector<bool> downtime;       // interval lies entirely inside a removal window

  std::size_t size() const { return labels.size(); }
};

using TrackMap = std::map<MachineId, LabelTrack>;

/// One track per machine in `series`. The interval containing a REMOVE gets
/// the failure's type (the most severe one if several land in the same
/// interval); intervals fully inside [remove, add) are flagged as downtime,
/// and for decommissions every later interval is.
TrackMap build_label_tracks(std::span<const FailureEvent> failures,
                            const ingest::SeriesMap& series, const LabelingConfig& cfg);

/// Copy of `series` without the listed machines.
ingest::SeriesMap exclude_machines(const ingest::SeriesMap& series,
                                   const std::set<MachineId>& machines);

/// failures.csv: machine_id,remove_us,add_us,duration_us,type
void write_failures(std::ostream& out, std::span<const FailureEvent> failures);
std::vector<FailureEvent> read_failures(std::istream& in);

/// Sparse label file: machine_id,interval,y,downtime for every interval that
/// is labeled or flagged, preceded by `# intervals=T`.
void write_label_tracks(std::ostream& out, const TrackMap& tracks);
TrackMap read_label_tracks(std::istream& in, const ingest::SeriesMap& series);

}  // namespace dcprophet::labeling
