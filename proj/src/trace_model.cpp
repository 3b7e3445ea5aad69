#include "dcprophet/trace_model.hpp"

#include <stdexcept>
#include <string>

namespace dcprophet {

std::string_view resource_name(ResourceKind r) {
  switch (r) {
    case ResourceKind::CpuUsage: return "cpu";
    case ResourceKind::DiskIoTime: return "diskio";
    case ResourceKind::DiskSpace: return "disk";
    case ResourceKind::MemoryUsage: return "mem";
    case ResourceKind::PageCache: return "cache";
    case ResourceKind::MemAccessPerInstr: return "mai";
  }
  return "?";
}

IntervalUsage::IntervalUsage(MachineId machine, std::size_t interval, const Usage& avg,
                             const Usage& peak)
    : machine_(machine), interval_(interval), avg_(avg), peak_(peak) {
  for (std::size_t r = 0; r < kResourceCount; ++r) {
    // Written as negations so NaN is rejected too.
    if (!(avg[r] >= 0.0 && avg[r] <= 1.0) || !(peak[r] >= 0.0 && peak[r] <= 1.0)) {
      throw std::invalid_argument("usage outside [0, 1] for resource " +
                                  std::string(resource_name(static_cast<ResourceKind>(r))));
    }
    if (avg[r] > peak[r]) {
      throw std::invalid_argument("average above peak for resource " +
                                  std::string(resource_name(static_cast<ResourceKind>(r))));
    }
  }
}

FailureType failure_type_from_label(int label) {
  if (label < 0 || label >= static_cast<int>(kClassCount)) {
    throw std::out_of_range("failure label " + std::to_string(label) + " outside 0..3");
  }
  return static_cast<FailureType>(label);
}

std::string_view failure_type_name(FailureType t) {
  switch (t) {
    case FailureType::Normal: return "normal";
    case FailureType::ImmediateReboot: return "IR";
    case FailureType::SlowReboot: return "SR";
    case FailureType::ForcibleDecommission: return "FD";
  }
  return "?";
}

FailureEvent FailureEvent::repaired(MachineId machine, Timestamp remove_time, Timestamp add_time,
                                    FailureType type) {
  if (type != FailureType::ImmediateReboot && type != FailureType::SlowReboot) {
    throw std::invalid_argument("a repaired failure must be IR or SR");
  }
  if (add_time < remove_time) throw std::invalid_argument("ADD precedes its REMOVE");
  return FailureEvent(machine, remove_time, add_time, type);
}

FailureEvent FailureEvent::decommissioned(MachineId machine, Timestamp remove_time) {
  return FailureEvent(machine, remove_time, std::nullopt, FailureType::ForcibleDecommission);
}

}  // namespace dcprophet
