#include "dcprophet/google_adapter.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <tuple>

#include "dcprophet/error.hpp"
#include "dcprophet/ingestion.hpp"
#include "dcprophet/text_io.hpp"

namespace dcprophet::google {
namespace {

constexpr std::size_t kTaskUsageColumns = 20;

// task_usage column feeding each native mean_/max_ field, in resource order
// cpu, diskio, disk, mem, cache, mai.
constexpr std::array<std::size_t, kResourceCount> kMeanColumn{5, 11, 12, 6, 9, 16};
constexpr std::array<std::size_t, kResourceCount> kMaxColumn{13, 14, 12, 10, 9, 16};

double optional_double(std::string_view s, std::size_t line) {
  if (s.empty()) return 0.0;
  double v = 0.0;
  if (!text::parse_double(s, v)) throw ParseError(line, "bad numeric field '" + std::string(s) + "'");
  return v;
}

using GroupKey = std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>;  // start, end, machine

struct Sums {
  Usage mean{};
  Usage max{};
};

void emit(std::ostream& out, const GroupKey& key, const Sums& sums, AdaptStats& stats) {
  ingest::UsageRecord rec;
  rec.start = Timestamp{std::get<0>(key)};
  rec.end = Timestamp{std::get<1>(key)};
  rec.machine = std::get<2>(key);
  for (std::size_t r = 0; r < kResourceCount; ++r) {
    double mean = sums.mean[r];
    double max = std::max(sums.max[r], mean);
    for (double* v : {&mean, &max}) {
      if (*v > 1.0 || *v < 0.0) {
        *v = std::clamp(*v, 0.0, 1.0);
        ++stats.clamped_values;
      }
    }
    rec.mean[r] = mean;
    rec.max[r] = max;
  }
  std::string line = std::to_string(rec.start.micros) + ',' + std::to_string(rec.end.micros) +
                     ',' + std::to_string(rec.machine);
  for (const double v : rec.mean) {
    line += ',';
    text::append_double(line, v);
  }
  for (const double v : rec.max) {
    line += ',';
    text::append_double(line, v);
  }
  line += '\n';
  out << line;
  ++stats.usage_rows;
}

}  // namespace

AdaptStats adapt_machine_events(std::istream& google_events, std::ostream& native_events) {
  AdaptStats stats;
  native_events << ingest::kEventsHeader << '\n';
  std::string line;
  std::size_t line_no = 0;
  while (text::read_line(google_events, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = text::split(line);
    if (f.size() < 3) throw ParseError(line_no, "machine_events row needs at least 3 columns");
    std::uint64_t time = 0;
    std::uint64_t machine = 0;
    std::uint64_t code = 0;
    if (!text::parse_u64(f[0], time) || !text::parse_u64(f[1], machine) ||
        !text::parse_u64(f[2], code) || code > 2) {
      throw ParseError(line_no, "bad machine_events row");
    }
    native_events << time << ',' << machine << ',' << code << '\n';
    ++stats.events;
  }
  return stats;
}

AdaptStats adapt_task_usage(std::span<std::istream* const> shards, std::ostream& native_usage) {
  AdaptStats stats;
  native_usage << ingest::kUsageHeader << '\n';
  std::map<GroupKey, Sums> open;
  std::uint64_t last_start = 0;

  auto flush_before = [&](std::uint64_t start) {
    auto it = open.begin();
    while (it != open.end() && std::get<0>(it->first) < start) {
      emit(native_usage, it->first, it->second, stats);
      it = open.erase(it);
    }
  };

  std::string line;
  for (std::istream* shard : shards) {
    std::size_t line_no = 0;
    while (text::read_line(*shard, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = text::split(line);
      if (f.size() < kTaskUsageColumns - 1) {
        throw ParseError(line_no, "task_usage row needs " + std::to_string(kTaskUsageColumns) + " columns");
      }
      ++stats.task_rows;
      std::uint64_t start = 0;
      std::uint64_t end = 0;
      std::uint64_t machine = 0;
      if (!text::parse_u64(f[0], start) || !text::parse_u64(f[1], end)) {
        throw ParseError(line_no, "bad start/end time");
      }
      if (end <= start || !text::parse_u64(f[4], machine)) {
        ++stats.skipped_rows;
        continue;
      }
      if (start < last_start) ++stats.out_of_order_rows;
      last_start = std::max(last_start, start);
      flush_before(last_start);

      Sums& sums = open[GroupKey{start, end, machine}];
      for (std::size_t r = 0; r < kResourceCount; ++r) {
        sums.mean[r] += optional_double(f[kMeanColumn[r]], line_no);
        sums.max[r] += optional_double(f[kMaxColumn[r]], line_no);
      }
    }
  }
  flush_before(UINT64_MAX);
  return stats;
}

}  // namespace dcprophet::google
