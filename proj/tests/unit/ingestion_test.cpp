#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "dcprophet/error.hpp"
#include "dcprophet/google_adapter.hpp"
#include "dcprophet/ingestion.hpp"

using namespace dcprophet;
using namespace dcprophet::ingest;

namespace {

constexpr std::uint64_t kBin = 300'000'000;

UsageRecord record(MachineId m, std::uint64_t start, std::uint64_t end, double cpu, double max_cpu) {
  UsageRecord r;
  r.machine = m;
  r.start = Timestamp{start};
  r.end = Timestamp{end};
  r.mean[0] = cpu;
  r.max[0] = max_cpu;
  return r;
}

}  // namespace

TEST(ParseMachineEvents, MapsFields) {
  std::istringstream in("time_us,machine_id,event\n600000000,42,1\n");
  const auto ev = parse_machine_events(in);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].machine, 42u);
  EXPECT_EQ(ev[0].time.micros, 600'000'000u);
  EXPECT_EQ(ev[0].kind, MachineEventKind::Remove);
}

TEST(ParseMachineEvents, EmptyFileGivesNothing) {
  std::istringstream empty("");
  EXPECT_TRUE(parse_machine_events(empty).empty());
  std::istringstream header_only("time_us,machine_id,event\n");
  EXPECT_TRUE(parse_machine_events(header_only).empty());
}

TEST(ParseMachineEvents, UnknownCodeReportsLine) {
  std::istringstream in("time_us,machine_id,event\n1,1,0\n2,1,7\n");
  try {
    parse_machine_events(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ParseMachineEvents, SortsByMachineThenTimeStably) {
  std::istringstream in("5,2,0\n3,1,1\n3,1,0\n1,2,1\n");
  const auto ev = parse_machine_events(in);
  ASSERT_EQ(ev.size(), 4u);
  EXPECT_EQ(ev[0].machine, 1u);
  EXPECT_EQ(ev[0].kind, MachineEventKind::Remove);  // file order kept on ties
  EXPECT_EQ(ev[1].kind, MachineEventKind::Add);
  EXPECT_EQ(ev[2].time.micros, 1u);
  EXPECT_EQ(ev[3].time.micros, 5u);
}

TEST(ParseUsage, MapsFieldsAndClamps) {
  std::istringstream in(std::string(kUsageHeader) +
                        "\n0,300000000,9,0.3,0,0,0,0,0,0.5,0,0,0,0,0"
                        "\n0,300000000,9,1.2,0,0,0,0,0,1.4,0,0,0,0,0\n");
  const auto res = parse_usage_records(in);
  ASSERT_EQ(res.records.size(), 2u);
  EXPECT_DOUBLE_EQ(res.records[0].mean[0], 0.3);
  EXPECT_DOUBLE_EQ(res.records[0].max[0], 0.5);
  EXPECT_DOUBLE_EQ(res.records[1].mean[0], 1.0);
  EXPECT_DOUBLE_EQ(res.records[1].max[0], 1.0);
  EXPECT_EQ(res.clamps.values, 2u);
  EXPECT_EQ(res.clamps.rows, 1u);
}

TEST(ParseUsage, RejectsEmptyWindowAndNonNumeric) {
  std::istringstream same(std::string(kUsageHeader) + "\n5,5,1,0,0,0,0,0,0,0,0,0,0,0,0\n");
  EXPECT_THROW(parse_usage_records(same), ParseError);
  std::istringstream text(std::string(kUsageHeader) + "\n0,5,1,x,0,0,0,0,0,0,0,0,0,0,0\n");
  try {
    parse_usage_records(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream inverted(std::string(kUsageHeader) + "\n0,5,1,0.6,0,0,0,0,0,0.5,0,0,0,0,0\n");
  EXPECT_THROW(parse_usage_records(inverted), ParseError);
}

TEST(Aggregate, SingleRecordFillsOneBin) {
  const std::vector<UsageRecord> recs{record(1, 3 * kBin, 4 * kBin, 0.4, 0.4)};
  const auto s = aggregate_intervals(recs, Timestamp{10 * kBin});
  const auto& m = s.at(1);
  ASSERT_EQ(m.size(), 10u);
  for (std::size_t t = 0; t < 10; ++t) EXPECT_EQ(m.present[t], t == 3);
  EXPECT_DOUBLE_EQ(m.intervals[3].avg(ResourceKind::CpuUsage), 0.4);
  EXPECT_EQ(m.intervals[0].avg(ResourceKind::CpuUsage), 0.0);
}

TEST(Aggregate, HalfBinsAverageByOverlap) {
  const std::vector<UsageRecord> recs{record(1, 0, kBin / 2, 0.2, 0.2),
                                      record(1, kBin / 2, kBin, 0.6, 0.6)};
  const auto s = aggregate_intervals(recs, Timestamp{kBin});
  EXPECT_NEAR(s.at(1).intervals[0].avg(ResourceKind::CpuUsage), 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(s.at(1).intervals[0].peak(ResourceKind::CpuUsage), 0.6);
}

TEST(Aggregate, SpanningRecordPeaksEveryBin) {
  UsageRecord r = record(1, kBin, 3 * kBin, 0.1, 0.1);
  r.mean[3] = 0.5;
  r.max[3] = 0.9;
  const std::vector<UsageRecord> recs{r};
  const auto s = aggregate_intervals(recs, Timestamp{4 * kBin});
  EXPECT_DOUBLE_EQ(s.at(1).intervals[1].peak(ResourceKind::MemoryUsage), 0.9);
  EXPECT_DOUBLE_EQ(s.at(1).intervals[2].peak(ResourceKind::MemoryUsage), 0.9);
}

TEST(Aggregate, RecordPastHorizonIsRejected) {
  const std::vector<UsageRecord> recs{record(1, 0, 2 * kBin, 0.1, 0.1)};
  EXPECT_THROW(aggregate_intervals(recs, Timestamp{kBin}), std::invalid_argument);
}

TEST(Aggregate, OrderIndependentAndBounded) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::uint64_t> t(0, 20 * kBin);
  std::vector<UsageRecord> recs;
  for (int i = 0; i < 400; ++i) {
    std::uint64_t a = t(rng), b = t(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    UsageRecord r;
    r.machine = 1 + i % 5;
    r.start = Timestamp{a};
    r.end = Timestamp{b};
    for (std::size_t k = 0; k < kResourceCount; ++k) {
      r.mean[k] = u(rng);
      r.max[k] = std::min(1.0, r.mean[k] + u(rng));
    }
    recs.push_back(r);
  }
  const auto base = aggregate_intervals(recs, Timestamp{20 * kBin});
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto again = aggregate_intervals(recs, Timestamp{20 * kBin});
    ASSERT_EQ(again.size(), base.size());
    for (const auto& [id, s] : base) {
      EXPECT_EQ(again.at(id).intervals, s.intervals);
      EXPECT_EQ(again.at(id).present, s.present);
    }
  }
  // Covered-time accounting: present bins never exceed record time plus one bin per record.
  std::uint64_t covered = 0, present_time = 0;
  for (const auto& r : recs) covered += r.end.micros - r.start.micros + kBin;
  for (const auto& [id, s] : base) {
    present_time += static_cast<std::uint64_t>(std::count(s.present.begin(), s.present.end(), true)) * kBin;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t k = 0; k < kResourceCount; ++k) {
        EXPECT_LE(s.intervals[i].avg()[k], s.intervals[i].peak()[k]);
      }
    }
  }
  EXPECT_LE(present_time, covered);
}

TEST(IntervalStore, RoundTripsBitExactly) {
  std::vector<UsageRecord> recs{record(4, 0, kBin, 1.0 / 3.0, 0.5), record(4, 2 * kBin, 3 * kBin, 0.1, 0.7),
                                record(2, kBin, 2 * kBin, 0.0, 0.0)};
  const auto s = aggregate_intervals(recs, Timestamp{3 * kBin});
  std::stringstream buf;
  write_interval_store(buf, s, Timestamp{3 * kBin});
  const auto back = read_interval_store(buf);
  EXPECT_EQ(back.horizon.micros, 3 * kBin);
  ASSERT_EQ(back.series.size(), 2u);
  for (const auto& [id, m] : s) {
    EXPECT_EQ(back.series.at(id).intervals, m.intervals);
    EXPECT_EQ(back.series.at(id).present, m.present);
  }
}

TEST(IntervalStore, MissingPreambleIsAFormatError) {
  std::istringstream in("machine_id,interval\n");
  EXPECT_THROW(read_interval_store(in), Error);
}

TEST(GoogleAdapter, SumsCoResidentTasksAndClamps) {
  // 20 columns; mean cpu col 5, mem col 6, max cpu col 13.
  auto row = [](std::uint64_t start, std::uint64_t machine, double cpu, double mem, double max_cpu) {
    std::string cols[20];
    cols[0] = std::to_string(start);
    cols[1] = std::to_string(start + 300'000'000);
    cols[4] = std::to_string(machine);
    cols[5] = std::to_string(cpu);
    cols[6] = std::to_string(mem);
    cols[13] = std::to_string(max_cpu);
    std::string line;
    for (int i = 0; i < 20; ++i) line += (i ? "," : "") + cols[i];
    return line + "\n";
  };
  std::istringstream shard(row(0, 7, 0.25, 0.1, 0.5) + row(0, 7, 0.5, 0.2, 0.75) + row(0, 8, 0.9, 0.0, 0.9) +
                           row(0, 8, 0.3, 0.0, 0.4) + row(300'000'000, 7, 0.1, 0.1, 0.1));
  std::ostringstream out;
  std::istream* shards[] = {&shard};
  const auto stats = google::adapt_task_usage(shards, out);
  EXPECT_EQ(stats.task_rows, 5u);
  EXPECT_EQ(stats.usage_rows, 3u);
  EXPECT_EQ(stats.clamped_values, 3u);  // machine 7 max cpu 1.25, machine 8 cpu mean 1.2 and max 1.3

  std::istringstream native(out.str());
  const auto parsed = parse_usage_records(native);
  ASSERT_EQ(parsed.records.size(), 3u);
  EXPECT_EQ(parsed.clamps.values, 0u);
  EXPECT_DOUBLE_EQ(parsed.records[0].mean[0], 0.75);
  EXPECT_DOUBLE_EQ(parsed.records[0].max[0], 1.0);
  EXPECT_NEAR(parsed.records[0].mean[3], 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(parsed.records[1].mean[0], 1.0);
}

TEST(GoogleAdapter, MachineEventsKeepFirstThreeColumns) {
  std::istringstream in("0,5,0,platform,0.5,0.5\n600000000,5,1,,,\n");
  std::ostringstream out;
  const auto stats = google::adapt_machine_events(in, out);
  EXPECT_EQ(stats.events, 2u);
  std::istringstream back(out.str());
  const auto ev = parse_machine_events(back);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[1].kind, MachineEventKind::Remove);
}
