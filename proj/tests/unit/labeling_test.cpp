#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dcprophet/labeling.hpp"

using namespace dcprophet;
using namespace dcprophet::labeling;

namespace {

constexpr std::uint64_t kSec = 1'000'000;
constexpr std::uint64_t kBin = 300 * kSec;

MachineEvent ev(MachineId m, std::uint64_t seconds, MachineEventKind k) {
  return {m, Timestamp{seconds * kSec}, k};
}

LabelingConfig config(std::uint64_t bins) {
  LabelingConfig c;
  c.trace_end = Timestamp{bins * kBin};
  return c;
}

ingest::SeriesMap flat_series(std::initializer_list<MachineId> ids, std::size_t bins, double cpu) {
  ingest::SeriesMap s;
  for (const auto id : ids) {
    ingest::MachineSeries m;
    m.machine = id;
    Usage u{};
    u[0] = cpu;
    for (std::size_t t = 0; t < bins; ++t) m.intervals.emplace_back(id, t, u, u);
    m.present.assign(bins, true);
    s.emplace(id, std::move(m));
  }
  return s;
}

}  // namespace

TEST(PairFailures, RemoveThenAddGivesDuration) {
  const std::vector<MachineEvent> events{ev(1, 1000, MachineEventKind::Remove),
                                         ev(1, 1960, MachineEventKind::Add)};
  const auto r = pair_failures(events, config(100));
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(*r.failures[0].duration(), std::chrono::seconds(960));
  EXPECT_EQ(r.failures[0].type(), FailureType::ImmediateReboot);
}

TEST(PairFailures, UnclosedRemoveIsDecommission) {
  const std::vector<MachineEvent> events{ev(1, 1000, MachineEventKind::Remove)};
  const auto r = pair_failures(events, config(100));
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_FALSE(r.failures[0].add_time());
  EXPECT_EQ(r.failures[0].type(), FailureType::ForcibleDecommission);
}

TEST(PairFailures, AddAfterTraceEndDoesNotClose) {
  const std::vector<MachineEvent> events{ev(1, 1000, MachineEventKind::Remove),
                                         ev(1, 100 * 300 + 5, MachineEventKind::Add)};
  const auto r = pair_failures(events, config(100));
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].type(), FailureType::ForcibleDecommission);
}

TEST(PairFailures, AddOnlyStreamIsEmpty) {
  const std::vector<MachineEvent> events{ev(1, 0, MachineEventKind::Add), ev(2, 5, MachineEventKind::Add),
                                         ev(2, 9, MachineEventKind::Update)};
  const auto r = pair_failures(events, config(10));
  EXPECT_TRUE(r.failures.empty());
  EXPECT_EQ(r.dropped_removes, 0u);
}

TEST(PairFailures, SecondRemoveIsDroppedAndCounted) {
  const std::vector<MachineEvent> events{ev(1, 100, MachineEventKind::Remove), ev(1, 200, MachineEventKind::Remove),
                                         ev(1, 4000, MachineEventKind::Add)};
  const auto r = pair_failures(events, config(100));
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.dropped_removes, 1u);
  EXPECT_EQ(r.failures[0].remove_time().micros, 100 * kSec);
  EXPECT_EQ(*r.failures[0].duration(), std::chrono::seconds(3900));
  EXPECT_EQ(r.failures[0].type(), FailureType::SlowReboot);
}

TEST(PairFailures, CountIdentityOnRandomStreams) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MachineEvent> events;
    std::size_t removes = 0;
    for (MachineId m = 1; m <= 4; ++m) {
      std::uint64_t t = 0;
      for (int i = 0; i < 30; ++i) {
        t += rng() % 5000 + 1;
        const auto k = static_cast<MachineEventKind>(rng() % 3);
        removes += k == MachineEventKind::Remove;
        events.push_back(ev(m, t, k));
      }
    }
    const auto r = pair_failures(events, config(1000));
    EXPECT_EQ(r.failures.size() + r.dropped_removes, removes);
  }
}

TEST(Categorize, Boundaries) {
  const auto cfg = config(10);
  EXPECT_EQ(categorize(std::chrono::minutes(16), cfg), FailureType::ImmediateReboot);
  EXPECT_EQ(categorize(std::chrono::hours(2), cfg), FailureType::SlowReboot);
  EXPECT_EQ(categorize(std::nullopt, cfg), FailureType::ForcibleDecommission);
  EXPECT_EQ(categorize(std::chrono::minutes(30), cfg), FailureType::SlowReboot);
  EXPECT_EQ(categorize(std::chrono::minutes(30) - Micros(1), cfg), FailureType::ImmediateReboot);
  EXPECT_EQ(categorize(Micros(0), cfg), FailureType::ImmediateReboot);
}

TEST(Degenerate, NeedsManyFailuresAndAllZeroUsage) {
  auto series = flat_series({1, 2, 3}, 20, 0.0);
  {
    auto& m2 = series.at(2);
    Usage u{};
    u[0] = 0.2;
    m2.intervals[7] = IntervalUsage(2, 7, u, u);
  }
  std::vector<FailureEvent> failures;
  for (MachineId m : {1, 2}) {
    for (std::uint64_t i = 0; i < 165; ++i) {
      failures.push_back(FailureEvent::repaired(m, Timestamp{i * 10}, Timestamp{i * 10 + 5},
                                                FailureType::ImmediateReboot));
    }
  }
  failures.push_back(FailureEvent::repaired(3, Timestamp{0}, Timestamp{5}, FailureType::ImmediateReboot));
  failures.push_back(FailureEvent::repaired(3, Timestamp{10}, Timestamp{15}, FailureType::ImmediateReboot));
  const auto cfg = config(20);
  const auto out = detect_degenerate_machines(series, failures, cfg);
  EXPECT_EQ(out, (std::set<MachineId>{1}));
}

TEST(Degenerate, ThresholdIsStrict) {
  const auto series = flat_series({1}, 5, 0.0);
  std::vector<FailureEvent> failures;
  for (std::uint64_t i = 0; i < 100; ++i) {
    failures.push_back(FailureEvent::repaired(1, Timestamp{i * 10}, Timestamp{i * 10 + 5},
                                              FailureType::ImmediateReboot));
  }
  EXPECT_TRUE(detect_degenerate_machines(series, failures, config(5)).empty());
  failures.push_back(FailureEvent::decommissioned(1, Timestamp{5000}));
  EXPECT_EQ(detect_degenerate_machines(series, failures, config(5)).size(), 1u);
}

TEST(LabelTracks, IrFlagsOnlyFullyCoveredIntervals) {
  // Remove 16 min in (interval 3), back 10 min later.
  const auto series = flat_series({1}, 10, 0.3);
  const std::vector<FailureEvent> f{FailureEvent::repaired(1, Timestamp{960 * kSec}, Timestamp{1560 * kSec},
                                                           FailureType::ImmediateReboot)};
  const auto tracks = build_label_tracks(f, series, config(10));
  const auto& tr = tracks.at(1);
  ASSERT_EQ(tr.size(), 10u);
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_EQ(tr.labels[t], t == 3 ? FailureType::ImmediateReboot : FailureType::Normal) << t;
    EXPECT_EQ(tr.downtime[t], t == 4) << t;
  }
}

TEST(LabelTracks, NoFailuresAllNormal) {
  const auto series = flat_series({1, 2}, 8, 0.3);
  const auto tracks = build_label_tracks({}, series, config(8));
  for (const auto& [id, tr] : tracks) {
    for (std::size_t t = 0; t < tr.size(); ++t) {
      EXPECT_EQ(tr.labels[t], FailureType::Normal);
      EXPECT_FALSE(tr.downtime[t]);
    }
  }
}

TEST(LabelTracks, DecommissionFlagsTheRest) {
  const auto series = flat_series({1}, 20, 0.3);
  const std::vector<FailureEvent> f{FailureEvent::decommissioned(1, Timestamp{10 * kBin + 7 * kSec})};
  const auto tr = build_label_tracks(f, series, config(20)).at(1);
  EXPECT_EQ(tr.labels[10], FailureType::ForcibleDecommission);
  for (std::size_t t = 0; t < 20; ++t) EXPECT_EQ(tr.downtime[t], t >= 11) << t;
}

TEST(LabelTracks, LabeledIntervalNeverFlaggedByItsOwnFailure) {
  // Remove exactly on a boundary: the interval still belongs to the label.
  const auto series = flat_series({1}, 10, 0.3);
  const std::vector<FailureEvent> f{FailureEvent::repaired(1, Timestamp{2 * kBin}, Timestamp{5 * kBin},
                                                           FailureType::SlowReboot)};
  const auto tr = build_label_tracks(f, series, config(10)).at(1);
  EXPECT_EQ(tr.labels[2], FailureType::SlowReboot);
  EXPECT_FALSE(tr.downtime[2]);
  EXPECT_TRUE(tr.downtime[3]);
  EXPECT_TRUE(tr.downtime[4]);
  EXPECT_FALSE(tr.downtime[5]);
}

TEST(LabelTracks, MostSevereLabelWinsInSharedInterval) {
  const auto series = flat_series({1}, 10, 0.3);
  const std::vector<FailureEvent> f{
      FailureEvent::repaired(1, Timestamp{10 * kSec}, Timestamp{20 * kSec}, FailureType::ImmediateReboot),
      FailureEvent::decommissioned(1, Timestamp{30 * kSec})};
  const auto tr = build_label_tracks(f, series, config(10)).at(1);
  EXPECT_EQ(tr.labels[0], FailureType::ForcibleDecommission);
}

TEST(LabelFiles, RoundTrip) {
  const auto series = flat_series({1, 2}, 12, 0.3);
  const std::vector<FailureEvent> f{
      FailureEvent::repaired(1, Timestamp{960 * kSec}, Timestamp{9000 * kSec}, FailureType::SlowReboot),
      FailureEvent::decommissioned(2, Timestamp{5 * kBin})};
  std::stringstream fbuf;
  write_failures(fbuf, f);
  EXPECT_EQ(read_failures(fbuf), f);

  const auto tracks = build_label_tracks(f, series, config(12));
  std::stringstream lbuf;
  write_label_tracks(lbuf, tracks);
  const auto back = read_label_tracks(lbuf, series);
  for (const auto& [id, tr] : tracks) {
    EXPECT_EQ(back.at(id).labels, tr.labels);
    EXPECT_EQ(back.at(id).downtime, tr.downtime);
  }
}

TEST(ExcludeMachines, DropsOnlyListed) {
  const auto series = flat_series({1, 2, 3}, 4, 0.1);
  const auto kept = exclude_machines(series, {2});
  EXPECT_EQ(kept.size(), 2u);
  EXPECT_FALSE(kept.contains(2));
}
