#pragma once

// Conversion of the public Google clusterdata-2011 tables into the native
// schemas.
//
// machine_events (no header): timestamp,machine_id,event_type,platform_id,cpus,memory
//   event_type uses the same 0=ADD 1=REMOVE 2=UPDATE codes as the native file.
//
// task_usage (no header, 20 columns):
//   0 start  1 end  2 job  3 task  4 machine  5 cpu_rate  6 canonical_mem
//   7 assigned_mem  8 unmapped_cache  9 total_cache  10 max_mem  11 disk_io_time
//   12 local_disk  13 max_cpu  14 max_disk_io  15 cpi  16 mai  17 sample_portion
//   18 aggregation_type  19 sampled_cpu
//
// Task rows sharing (machine, start, end) are summed into one machine-level
// row, then clamped to 1. Summing (rather than averaging) co-resident tasks
// is a modelling choice: machine usage is the total of what its tasks use.
// Resources without a published maximum (disk space, page cache, MAI) reuse
// the mean as the peak. Task rows are assumed to arrive in non-decreasing
// start time, as in the published shards; a group is emitted once a later
// start time is seen.

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>

namespace dcprophet::google {

struct AdaptStats {
  std::uint64_t events = 0;
  std::uint64_t task_rows = 0;
  std::uint64_t usage_rows = 0;
  std::uint64_t skipped_rows = 0;  // empty window or unusable machine id
  std::uint64_t clamped_values = 0;
  std::uint64_t out_of_order_rows = 0;
};

/// Throws ParseError on rows with too few columns or non-numeric fields.
AdaptStats adapt_machine_events(std::istream& google_events, std::ostream& native_events);

/// Streams every task_usage shard in order into one native usage file.
AdaptStats adapt_task_usage(std::span<std::istream* const> shards, std::ostream& native_usage);

}  // namespace dcprophet::google
