#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jigsaw/cost/profile.hpp"

namespace jigsaw::sched {

// Simulated time is integer microseconds throughout; there is no floating
// time anywhere in the scheduling or simulation path.
using Micros = std::int64_t;

inline constexpr Micros kNever = std::int64_t{1} << 60;

inline Micros ms_to_us(double ms) { return static_cast<Micros>(__builtin_llround(ms * 1000.0)); }
inline Micros seconds_to_us(double s) { return static_cast<Micros>(__builtin_llround(s * 1e6)); }

// A job as described by the trace: workers, iterations and the per-worker
// backprop fractions (j/k under the suffix rule when partial backprop is on,
// 1.0 otherwise).
struct JobDag {
  std::string job_id;
  Micros arrival = 0;
  std::string model_name;
  int workers = 1;
  int total_iterations = 1;
  bool spb_enabled = true;
  std::vector<double> fractions;
};

// A job with demands resolved against the profile table, ready to schedule.
struct JobInstance {
  int index = 0;  // dense id, position in the trace
  std::string job_id;
  Micros arrival = 0;
  int workers = 1;
  int total_iterations = 1;
  std::vector<cost::TaskDemand> demands;  // one per worker
  double grad_size_mb = 0.0;
};

// One worker-iteration, the schedulable unit.
struct TaskSpec {
  int job = 0;
  int worker = 0;  // 1-based
  int iteration = 1;
  cost::TaskDemand demand;
  std::optional<int> prev_machine;  // machine of this worker's previous iteration
  Micros ready_time = 0;            // all tasks of iteration-1 finished
};

struct Assignment {
  int job = 0;
  int worker = 0;
  int iteration = 1;
  int machine = 0;
  Micros start = 0;
  Micros end = 0;
  bool migrated = false;
};

struct SchedulerConfig {
  double interval_s = 60.0;       // scheduling interval T
  double gamma_ms_per_mb = 0.8;   // migration cost coefficient (10 Gb/s link)
  double comm_ms_per_mb = 0.0;    // PS update time folded into task duration
  bool priority_includes_compute = true;
  int max_coresident_tasks = 0;   // per machine; 0 means unlimited

  Micros interval_us() const { return seconds_to_us(interval_s); }
  Micros surcharge_us(double grad_size_mb) const { return ms_to_us(gamma_ms_per_mb * grad_size_mb); }
};

// Maxima over the queue the priority is normalized by.
struct QueueStats {
  double max_mem_gb = 0.0;
  double max_duration_ms = 0.0;
  double max_compute = 0.0;
};

// Normalized product of the task's resource demands and running time, in
// (0, 1]; higher runs first. Ties are broken by (job, worker) at pop time.
double priority(const TaskSpec& task, const QueueStats& stats, const SchedulerConfig& cfg);

}  // namespace jigsaw::sched
