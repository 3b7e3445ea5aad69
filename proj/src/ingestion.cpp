#include "dcprophet/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dcprophet/error.hpp"
#include "dcprophet/text_io.hpp"

namespace dcprophet::ingest {
namespace {

constexpr std::size_t kUsageFields = 3 + 2 * kResourceCount;

std::string store_header() {
  std::string h = "machine_id,interval";
  for (const char* kind : {"avg", "peak"}) {
    for (const auto r : kAllResources) {
      h += ',';
      h += kind;
      h += '_';
      h += resource_name(r);
    }
  }
  return h;
}

std::uint64_t field_u64(std::string_view s, std::size_t line, const char* what) {
  std::uint64_t v = 0;
  if (!text::parse_u64(s, v)) throw ParseError(line, std::string("bad ") + what + " '" + std::string(s) + "'");
  return v;
}

double field_double(std::string_view s, std::size_t line, const char* what) {
  double v = 0.0;
  if (!text::parse_double(s, v) || std::isnan(v)) {
    throw ParseError(line, std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

bool usage_less(const UsageRecord& a, const UsageRecord& b) {
  if (a.machine != b.machine) return a.machine < b.machine;
  if (a.start != b.start) return a.start < b.start;
  if (a.end != b.end) return a.end < b.end;
  if (a.mean != b.mean) return a.mean < b.mean;
  return a.max < b.max;
}

}  // namespace

std::vector<MachineEvent> parse_machine_events(std::istream& in) {
  std::vector<MachineEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (text::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line == kEventsHeader) continue;
    const auto f = text::split(line);
    if (f.size() != 3) throw ParseError(line_no, "expected 3 fields, got " + std::to_string(f.size()));
    MachineEvent e;
    e.time = Timestamp{field_u64(f[0], line_no, "time_us")};
    e.machine = field_u64(f[1], line_no, "machine_id");
    const auto code = field_u64(f[2], line_no, "event");
    if (code > 2) throw ParseError(line_no, "unknown event code " + std::to_string(code));
    e.kind = static_cast<MachineEventKind>(code);
    events.push_back(e);
  }
  std::stable_sort(events.begin(), events.end(), [](const MachineEvent& a, const MachineEvent& b) {
    return a.machine != b.machine ? a.machine < b.machine : a.time < b.time;
  });
  return events;
}

UsageParseResult parse_usage_records(std::istream& in) {
  UsageParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (text::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line == kUsageHeader) continue;
    const auto f = text::split(line);
    if (f.size() != kUsageFields) {
      throw ParseError(line_no, "expected " + std::to_string(kUsageFields) + " fields, got " +
                                    std::to_string(f.size()));
    }
    UsageRecord rec;
    rec.start = Timestamp{field_u64(f[0], line_no, "start_us")};
    rec.end = Timestamp{field_u64(f[1], line_no, "end_us")};
    rec.machine = field_u64(f[2], line_no, "machine_id");
    if (rec.start >= rec.end) throw ParseError(line_no, "start_us must be before end_us");
    bool clamped = false;
    for (std::size_t r = 0; r < kResourceCount; ++r) {
      for (auto [dst, col] : {std::pair{&rec.mean[r], 3 + r}, std::pair{&rec.max[r], 3 + kResourceCount + r}}) {
        double v = field_double(f[col], line_no, "usage value");
        if (v < 0.0 || v > 1.0) {
          v = std::clamp(v, 0.0, 1.0);
          ++result.clamps.values;
          clamped = true;
        }
        *dst = v;
      }
      if (rec.mean[r] > rec.max[r]) {
        throw ParseError(line_no, "mean above max for " +
                                      std::string(resource_name(static_cast<ResourceKind>(r))));
      }
    }
    if (clamped) ++result.clamps.rows;
    result.records.push_back(rec);
  }
  return result;
}

SeriesMap aggregate_intervals(std::span<const UsageRecord> records, Timestamp horizon,
                              Micros interval) {
  if (interval.count() <= 0) throw std::invalid_argument("interval must be positive");
  const auto len = static_cast<std::uint64_t>(interval.count());
  const std::size_t bins = interval_count(horizon, interval);

  // A canonical order makes the floating-point sums independent of input order.
  std::vector<const UsageRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) {
    if (r.end > horizon) throw std::invalid_argument("usage record ends after the horizon");
    if (r.start >= r.end) throw std::invalid_argument("usage record with start >= end");
    order.push_back(&r);
  }
  std::sort(order.begin(), order.end(),
            [](const UsageRecord* a, const UsageRecord* b) { return usage_less(*a, *b); });

  SeriesMap out;
  std::vector<double> weighted(bins * kResourceCount);
  std::vector<double> weight(bins);
  std::vector<double> peak(bins * kResourceCount);
  std::vector<bool> present(bins);

  std::size_t i = 0;
  while (i < order.size()) {
    const MachineId machine = order[i]->machine;
    std::fill(weighted.begin(), weighted.end(), 0.0);
    std::fill(weight.begin(), weight.end(), 0.0);
    std::fill(peak.begin(), peak.end(), 0.0);
    std::fill(present.begin(), present.end(), false);

    for (; i < order.size() && order[i]->machine == machine; ++i) {
      const UsageRecord& rec = *order[i];
      const std::size_t first = rec.start.micros / len;
      const std::size_t last = (rec.end.micros - 1) / len;
      for (std::size_t t = first; t <= last; ++t) {
        const std::uint64_t lo = std::max<std::uint64_t>(rec.start.micros, t * len);
        const std::uint64_t hi = std::min<std::uint64_t>(rec.end.micros, (t + 1) * len);
        const double w = static_cast<double>(hi - lo);
        weight[t] += w;
        present[t] = true;
        for (std::size_t r = 0; r < kResourceCount; ++r) {
          weighted[t * kResourceCount + r] += w * rec.mean[r];
          peak[t * kResourceCount + r] = std::max(peak[t * kResourceCount + r], rec.max[r]);
        }
      }
    }

    MachineSeries s;
    s.machine = machine;
    s.intervals.reserve(bins);
    s.present = present;
    for (std::size_t t = 0; t < bins; ++t) {
      Usage avg{};
      Usage pk{};
      if (present[t]) {
        for (std::size_t r = 0; r < kResourceCount; ++r) {
          pk[r] = peak[t * kResourceCount + r];
          // Rounding in the weighted mean may overshoot the max by an ulp.
          avg[r] = std::clamp(weighted[t * kResourceCount + r] / weight[t], 0.0, pk[r]);
        }
      }
      s.intervals.emplace_back(machine, t, avg, pk);
    }
    out.emplace(machine, std::move(s));
  }
  return out;
}

void write_interval_store(std::ostream& out, const SeriesMap& series, Timestamp horizon,
                          Micros interval) {
  out << "# horizon_us=" << horizon.micros << " interval_us=" << interval.count() << '\n';
  out << store_header() << '\n';
  std::string line;
  for (const auto& [machine, s] : series) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (!s.present[t]) continue;
      line.clear();
      line += std::to_string(machine);
      line += ',';
      line += std::to_string(t);
      for (const double v : s.intervals[t].avg()) {
        line += ',';
        text::append_double(line, v);
      }
      for (const double v : s.intervals[t].peak()) {
        line += ',';
        text::append_double(line, v);
      }
      line += '\n';
      out << line;
    }
  }
}

IntervalStore read_interval_store(std::istream& in) {
  IntervalStore store;
  std::string line;
  if (!text::read_line(in, line) || !line.starts_with("# horizon_us=")) {
    throw ParseError(1, "missing '# horizon_us=' preamble");
  }
  {
    std::uint64_t horizon = 0;
    std::uint64_t len = 0;
    const auto body = std::string_view(line).substr(2);
    const auto parts = text::split(body, ' ');
    for (const auto p : parts) {
      if (p.starts_with("horizon_us=")) text::parse_u64(p.substr(11), horizon);
      if (p.starts_with("interval_us=")) text::parse_u64(p.substr(12), len);
    }
    if (len == 0) throw ParseError(1, "missing interval_us");
    store.horizon = Timestamp{horizon};
    store.interval = Micros(static_cast<std::int64_t>(len));
  }
  if (!text::read_line(in, line) || line != store_header()) throw ParseError(2, "bad store header");
  const std::size_t bins = interval_count(store.horizon, store.interval);
  std::size_t line_no = 2;
  while (text::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = text::split(line);
    if (f.size() != 2 + 2 * kResourceCount) throw ParseError(line_no, "wrong field count");
    const MachineId machine = field_u64(f[0], line_no, "machine_id");
    const std::size_t t = field_u64(f[1], line_no, "interval");
    if (t >= bins) throw ParseError(line_no, "interval beyond horizon");
    Usage avg{};
    Usage peak{};
    for (std::size_t r = 0; r < kResourceCount; ++r) {
      avg[r] = field_double(f[2 + r], line_no, "usage");
      peak[r] = field_double(f[2 + kResourceCount + r], line_no, "usage");
    }
    auto [it, inserted] = store.series.try_emplace(machine);
    MachineSeries& s = it->second;
    if (inserted) {
      s.machine = machine;
      s.intervals.reserve(bins);
      for (std::size_t k = 0; k < bins; ++k) s.intervals.emplace_back(machine, k, Usage{}, Usage{});
      s.present.assign(bins, false);
    }
    try {
      s.intervals[t] = IntervalUsage(machine, t, avg, peak);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
    s.present[t] = true;
  }
  return store;
}

void write_machine_events(std::ostream& out, std::span<const MachineEvent> events) {
  out << kEventsHeader << '\n';
  for (const auto& e : events) {
    out << e.time.micros << ',' << e.machine << ',' << static_cast<int>(e.kind) << '\n';
  }
}

void write_usage_records(std::ostream& out, std::span<const UsageRecord> records) {
  out << kUsageHeader << '\n';
  std::string line;
  for (const auto& r : records) {
    line = std::to_string(r.start.micros) + ',' + std::to_string(r.end.micros) + ',' +
           std::to_string(r.machine);
    for (const double v : r.mean) {
      line += ',';
      text::append_double(line, v);
    }
    for (const double v : r.max) {
      line += ',';
      text::append_double(line, v);
    }
    line += '\n';
    out << line;
  }
}

}  // namespace dcprophet::ingest
