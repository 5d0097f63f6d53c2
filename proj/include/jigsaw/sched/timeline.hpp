#pragma once

#include <map>
#include <optional>

#include "jigsaw/sched/types.hpp"

namespace jigsaw::sched {

// Reservation timeline of one device: a piecewise-constant usage profile
// over memory, compute fraction and co-resident task count. At every instant
// the committed reservations satisfy sum(mem) <= capacity and
// sum(compute) <= 1.
class MachineTimeline {
 public:
  MachineTimeline(int machine_id, double mem_capacity_gb, int max_coresident_tasks = 0)
      : id_(machine_id), mem_cap_(mem_capacity_gb), max_tasks_(max_coresident_tasks) {}

  int id() const { return id_; }
  double mem_capacity_gb() const { return mem_cap_; }

  // Earliest t >= ready at which (mem, compute) fits for `duration`
  // contiguously; nullopt when the task alone exceeds the machine, or when
  // the earliest candidate reaches `search_limit`.
  std::optional<Micros> earliest_fit(Micros ready, Micros duration, double mem_gb, double compute,
                                     Micros search_limit = kNever) const;

  void reserve(Micros start, Micros end, double mem_gb, double compute);

  // Usage level at an instant (for tests).
  double mem_in_use(Micros t) const;
  double compute_in_use(Micros t) const;

 private:
  struct Level {
    double mem = 0.0;
    double compute = 0.0;
    int tasks = 0;
  };

  bool fits(const Level& level, double mem_gb, double compute) const;
  const Level& level_at(Micros t) const;

  int id_;
  double mem_cap_;
  int max_tasks_;
  // Usage on [key, next key); zero before the first key and after the last
  // key's level (which returns to zero once every reservation has ended).
  std::map<Micros, Level> steps_;
};

// Start time and migration-adjusted duration of a task on one machine.
struct StartOption {
  Micros start = 0;
  Micros effective_duration = 0;
};

// Earliest feasible start of `task` on `machine`. The effective duration
// adds the model-transfer surcharge when the worker's previous iteration ran
// elsewhere; the first iteration carries no surcharge.
std::optional<StartOption> earliest_start(const TaskSpec& task, const MachineTimeline& machine,
                                          const SchedulerConfig& cfg, double grad_size_mb,
                                          Micros search_limit = kNever);

}  // namespace jigsaw::sched
