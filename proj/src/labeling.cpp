#include "dcprophet/labeling.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "dcprophet/error.hpp"
#include "dcprophet/text_io.hpp"

namespace dcprophet::labeling {

void LabelingConfig::validate() const {
  if (ir_max_downtime.count() <= 0) throw std::invalid_argument("ir_max_downtime must be positive");
  if (interval.count() <= 0) throw std::invalid_argument("interval must be positive");
}

FailureType categorize(std::optional<Micros> duration, const LabelingConfig& cfg) {
  if (!duration) return FailureType::ForcibleDecommission;
  return *duration < cfg.ir_max_downtime ? FailureType::ImmediateReboot : FailureType::SlowReboot;
}

PairingResult pair_failures(std::span<const MachineEvent> events, const LabelingConfig& cfg) {
  cfg.validate();
  std::vector<MachineEvent> sorted(events.begin(), events.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const MachineEvent& a, const MachineEvent& b) {
    return a.machine != b.machine ? a.machine < b.machine : a.time < b.time;
  });

  PairingResult out;
  std::optional<MachineEvent> open;
  auto close_open = [&] {
    if (open) out.failures.push_back(FailureEvent::decommissioned(open->machine, open->time));
    open.reset();
  };

  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const MachineEvent& e = sorted[i];
    if (open && open->machine != e.machine) close_open();
    switch (e.kind) {
      case MachineEventKind::Update:
        break;
      case MachineEventKind::Remove:
        if (open) {
          ++out.dropped_removes;
        } else {
          open = e;
        }
        break;
      case MachineEventKind::Add:
        // An ADD after the end of the trace was never observed.
        if (open && e.time <= cfg.trace_end) {
          const Micros downtime = e.time - open->time;
          out.failures.push_back(
              FailureEvent::repaired(e.machine, open->time, e.time, categorize(downtime, cfg)));
          open.reset();
        }
        break;
    }
  }
  close_open();
  return out;
}

std::set<MachineId> detect_degenerate_machines(const ingest::SeriesMap& series,
                                               std::span<const FailureEvent> failures,
                                               const LabelingConfig& cfg) {
  std::map<MachineId, std::size_t> counts;
  for (const auto& f : failures) ++counts[f.machine()];

  std::set<MachineId> out;
  for (const auto& [machine, count] : counts) {
    if (count <= cfg.degenerate_min_failures) continue;
    bool all_zero = true;
    if (const auto it = series.find(machine); it != series.end()) {
      const auto& s = it->second;
      for (std::size_t t = 0; t < s.size() && all_zero; ++t) {
        if (!s.present[t]) continue;
        for (std::size_t r = 0; r < kResourceCount; ++r) {
          if (s.intervals[t].avg()[r] != 0.0 || s.intervals[t].peak()[r] != 0.0) {
            all_zero = false;
            break;
          }
        }
      }
    }
    if (all_zero) out.insert(machine);
  }
  return out;
}

TrackMap build_label_tracks(std::span<const FailureEvent> failures,
                            const ingest::SeriesMap& series, const LabelingConfig& cfg) {
  cfg.validate();
  const auto len = static_cast<std::uint64_t>(cfg.interval.count());
  TrackMap tracks;
  for (const auto& [machine, s] : series) {
    LabelTrack track;
    track.machine = machine;
    track.labels.assign(s.size(), FailureType::Normal);
    track.downtime.assign(s.size(), false);
    tracks.emplace(machine, std::move(track));
  }

  for (const auto& f : failures) {
    const auto it = tracks.find(f.machine());
    if (it == tracks.end()) continue;
    LabelTrack& track = it->second;
    const std::size_t bins = track.size();
    const std::size_t removed_in = f.remove_time().micros / len;
    if (removed_in >= bins) continue;
    track.labels[removed_in] = std::max(track.labels[removed_in], f.type());

    // Intervals after the labeled one that lie entirely inside [remove, add).
    const std::size_t first_down = removed_in + 1;
    std::size_t end_down = bins;  // exclusive
    if (const auto add = f.add_time()) end_down = std::min<std::size_t>(bins, add->micros / len);
    for (std::size_t t = first_down; t < end_down; ++t) track.downtime[t] = true;
  }
  return tracks;
}

ingest::SeriesMap exclude_machines(const ingest::SeriesMap& series,
                                   const std::set<MachineId>& machines) {
  ingest::SeriesMap out;
  for (const auto& [machine, s] : series) {
    if (!machines.contains(machine)) out.emplace(machine, s);
  }
  return out;
}

void write_failures(std::ostream& out, std::span<const FailureEvent> failures) {
  out << "machine_id,remove_us,add_us,duration_us,type\n";
  for (const auto& f : failures) {
    out << f.machine() << ',' << f.remove_time().micros << ',';
    if (const auto add = f.add_time()) out << add->micros;
    out << ',';
    if (const auto d = f.duration()) out << d->count();
    out << ',' << to_label(f.type()) << '\n';
  }
}

std::vector<FailureEvent> read_failures(std::istream& in) {
  std::vector<FailureEvent> out;
  std::string line;
  std::size_t line_no = 0;
  while (text::read_line(in, line)) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line.starts_with("machine_id"))) continue;
    const auto f = text::split(line);
    std::uint64_t machine = 0;
    std::uint64_t remove = 0;
    std::uint64_t type = 0;
    if (f.size() != 5 || !text::parse_u64(f[0], machine) || !text::parse_u64(f[1], remove) ||
        !text::parse_u64(f[4], type)) {
      throw ParseError(line_no, "bad failures row");
    }
    if (f[2].empty()) {
      out.push_back(FailureEvent::decommissioned(machine, Timestamp{remove}));
      continue;
    }
    std::uint64_t add = 0;
    if (!text::parse_u64(f[2], add)) throw ParseError(line_no, "bad add_us");
    try {
      out.push_back(FailureEvent::repaired(machine, Timestamp{remove}, Timestamp{add},
                                           failure_type_from_label(static_cast<int>(type))));
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

void write_label_tracks(std::ostream& out, const TrackMap& tracks) {
  const std::size_t bins = tracks.empty() ? 0 : tracks.begin()->second.size();
  out << "# intervals=" << bins << '\n';
  out << "machine_id,interval,y,downtime\n";
  for (const auto& [machine, track] : tracks) {
    for (std::size_t t = 0; t < track.size(); ++t) {
      if (track.labels[t] == FailureType::Normal && !track.downtime[t]) continue;
      out << machine << ',' << t << ',' << to_label(track.labels[t]) << ','
          << (track.downtime[t] ? 1 : 0) << '\n';
    }
  }
}

TrackMap read_label_tracks(std::istream& in, const ingest::SeriesMap& series) {
  TrackMap tracks;
  for (const auto& [machine, s] : series) {
    LabelTrack track;
    track.machine = machine;
    track.labels.assign(s.size(), FailureType::Normal);
    track.downtime.assign(s.size(), false);
    tracks.emplace(machine, std::move(track));
  }
  std::string line;
  std::size_t line_no = 0;
  while (text::read_line(in, line)) {
    ++line_no;
    if (line.empty() || line.starts_with('#') || line.starts_with("machine_id")) continue;
    const auto f = text::split(line);
    std::uint64_t machine = 0;
    std::uint64_t t = 0;
    std::uint64_t y = 0;
    std::uint64_t down = 0;
    if (f.size() != 4 || !text::parse_u64(f[0], machine) || !text::parse_u64(f[1], t) ||
        !text::parse_u64(f[2], y) || !text::parse_u64(f[3], down) || y > 3 || down > 1) {
      throw ParseError(line_no, "bad label row");
    }
    const auto it = tracks.find(machine);
    if (it == tracks.end()) continue;  // excluded machine
    if (t >= it->second.size()) throw ParseError(line_no, "interval beyond horizon");
    it->second.labels[t] = static_cast<FailureType>(y);
    it->second.downtime[t] = down == 1;
  }
  return tracks;
}

}  // namespace dcprophet::labeling
