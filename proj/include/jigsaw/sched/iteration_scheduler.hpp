#pragma once

#include <memory>
#include <set>

#include "jigsaw/rng.hpp"
#include "jigsaw/sched/engine.hpp"
#include "jigsaw/sched/timeline.hpp"

namespace jigsaw::sched {

enum class Placement {
  EarliestStart,    // greedy argmin start over machines, affinity tie-break
  RandomFeasible,   // uniform over feasible machines (migration ablation)
};

// Iteration-level scheduler. Every worker-iteration is an independently
// placeable task. Ready tasks sit in a priority queue ordered by the product
// of their resource demands and running time; the scheduler repeatedly pops
// the top task and places it at its earliest feasible start over all
// machines, preferring the machine that ran the worker's previous iteration
// (the migration surcharge makes that machine win ties naturally). When the
// last task of a job's iteration is placed, the next iteration's tasks are
// synthesized with ready time equal to the iteration's latest end, so a job
// advances through as many iterations as fit in the planning window. Tasks
// whose earliest start falls beyond now+T stay queued for the next interval.
class IterationScheduler : public PolicyEngine {
 public:
  IterationScheduler(int num_machines, double mem_per_machine_gb, SchedulerConfig cfg,
                     Placement placement = Placement::EarliestStart, std::uint64_t seed = 0);

  void add_job(const JobInstance& job) override;
  void on_tick(Micros now) override;
  bool idle() const override;

  // Plans [now, now + T); returns the assignments committed in this pass.
  std::vector<Assignment> plan_interval(Micros now);

  QueueStats queue_stats() const;  // maxima over the currently queued tasks
  const MachineTimeline& machine(int m) const { return machines_[m]; }

 private:
  struct QueueKey {
    double product;  // demand product; larger pops first
    int job;
    int worker;
    bool operator<(const QueueKey& o) const {
      if (product != o.product) return product > o.product;
      if (job != o.job) return job < o.job;
      return worker < o.worker;
    }
  };

  struct JobState {
    JobInstance spec;
    std::vector<std::optional<int>> prev_machine;  // per worker, 1-based index 0..k-1
    int current_iteration = 1;
    int unplaced = 0;           // tasks of current_iteration still unplaced
    Micros iteration_end = 0;   // max end among placed tasks of current_iteration
    bool failed = false;
  };

  double demand_product(const cost::TaskDemand& d) const;
  TaskSpec make_task(const JobState& js, int worker) const;
  void enqueue_iteration(int job);
  void fail_job(int job);

  SchedulerConfig cfg_;
  Placement placement_;
  Rng rng_;
  std::vector<MachineTimeline> machines_;
  std::map<QueueKey, TaskSpec> queue_;
  std::vector<JobState> jobs_;
  std::vector<int> job_slot_;  // job index -> slot in jobs_
};

}  // namespace jigsaw::sched
