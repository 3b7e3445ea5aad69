#pragma once

// Core value types of the trace: machines, events, per-interval usage and
// failure categories. No I/O lives here.

#include <array>
#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace dcprophet {

using MachineId = std::uint64_t;
using Micros = std::chrono::microseconds;

inline constexpr Micros kDefaultInterval = std::chrono::minutes(5);

/// Microseconds since trace start.
struct Timestamp {
  std::uint64_t micros = 0;

  constexpr auto operator<=>(const Timestamp&) const = default;

  constexpr Timestamp operator+(Micros d) const {
    return Timestamp{micros + static_cast<std::uint64_t>(d.count())};
  }
  constexpr Micros operator-(Timestamp other) const {
    return Micros(static_cast<std::int64_t>(micros) -
                  static_cast<std::int64_t>(other.micros));
  }
};

/// Index of the interval containing `t`.
constexpr std::size_t interval_of(Timestamp t, Micros interval = kDefaultInterval) {
  return static_cast<std::size_t>(t.micros / static_cast<std::uint64_t>(interval.count()));
}

/// Number of intervals needed to cover [0, horizon).
constexpr std::size_t interval_count(Timestamp horizon, Micros interval = kDefaultInterval) {
  const auto len = static_cast<std::uint64_t>(interval.count());
  return static_cast<std::size_t>((horizon.micros + len - 1) / len);
}

enum class ResourceKind : std::uint8_t {
  CpuUsage = 0,
  DiskIoTime = 1,
  DiskSpace = 2,
  MemoryUsage = 3,
  PageCache = 4,
  MemAccessPerInstr = 5,
};

inline constexpr std::size_t kResourceCount = 6;

inline constexpr std::array<ResourceKind, kResourceCount> kAllResources = {
    ResourceKind::CpuUsage,    ResourceKind::DiskIoTime, ResourceKind::DiskSpace,
    ResourceKind::MemoryUsage, ResourceKind::PageCache,  ResourceKind::MemAccessPerInstr,
};

constexpr std::size_t index_of(ResourceKind r) { return static_cast<std::size_t>(r); }

/// Short column suffix used by the CSV schemas ("cpu", "diskio", ...).
std::string_view resource_name(ResourceKind r);

enum class MachineEventKind : std::uint8_t { Add = 0, Remove = 1, Update = 2 };

struct MachineEvent {
  MachineId machine = 0;
  Timestamp time;
  MachineEventKind kind = MachineEventKind::Add;

  bool operator==(const MachineEvent&) const = default;
};

using Usage = std::array<double, kResourceCount>;

/// Average and peak usage of one machine over one interval, each in [0, 1]
/// with avg <= peak per resource.
class IntervalUsage {
 public:
  IntervalUsage() = default;
  /// Throws std::invalid_argument when a value leaves [0, 1] or avg > peak.
  IntervalUsage(MachineId machine, std::size_t interval, const Usage& avg, const Usage& peak);

  MachineId machine() const { return machine_; }
  std::size_t interval() const { return interval_; }
  const Usage& avg() const { return avg_; }
  const Usage& peak() const { return peak_; }
  double avg(ResourceKind r) const { return avg_[index_of(r)]; }
  double peak(ResourceKind r) const { return peak_[index_of(r)]; }

  bool operator==(const IntervalUsage&) const = default;

 private:
  MachineId machine_ = 0;
  std::size_t interval_ = 0;
  Usage avg_{};
  Usage peak_{};
};

enum class FailureType : std::uint8_t {
  Normal = 0,
  ImmediateReboot = 1,
  SlowReboot = 2,
  ForcibleDecommission = 3,
};

inline constexpr std::size_t kClassCount = 4;

constexpr int to_label(FailureType t) { return static_cast<int>(t); }
/// Throws std::out_of_range for labels outside 0..3.
FailureType failure_type_from_label(int label);
std::string_view failure_type_name(FailureType t);
constexpr bool is_failure(FailureType t) { return t != FailureType::Normal; }

/// A REMOVE, optionally paired with the ADD that brought the machine back.
class FailureEvent {
 public:
  /// Machine came back at `add_time`.
  static FailureEvent repaired(MachineId machine, Timestamp remove_time, Timestamp add_time,
                               FailureType type);
  /// Machine never came back before the end of the trace.
  static FailureEvent decommissioned(MachineId machine, Timestamp remove_time);

  MachineId machine() const { return machine_; }
  Timestamp remove_time() const { return remove_; }
  std::optional<Timestamp> add_time() const { return add_; }
  std::optional<Micros> duration() const {
    if (!add_) return std::nullopt;
    return *add_ - remove_;
  }
  FailureType type() const { return type_; }

  bool operator==(const FailureEvent&) const = default;

 private:
  FailureEvent(MachineId m, Timestamp r, std::optional<Timestamp> a, FailureType t)
      : machine_(m), remove_(r), add_(a), type_(t) {}

  MachineId machine_;
  Timestamp remove_;
  std::optional<Timestamp> add_;
  FailureType type_;
};

}  // namespace dcprophet
