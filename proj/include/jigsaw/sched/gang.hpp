#pragma once

#include <map>

#include "jigsaw/sched/engine.hpp"

namespace jigsaw::sched {

enum class GangPolicy {
  Fifo,     // arrival order, all-or-nothing head-of-line allocation
  Las,      // least attained GPU service, preemptive with quantum T
  Packing,  // first-fit-decreasing over GPU count, non-preemptive
};

// Job-granular baselines. A job occupies one whole GPU per worker from
// admission until it completes (Fifo, Packing) or is preempted at an
// iteration boundary after losing its quantum (Las). Iterations of a running
// job proceed back to back; iteration i+1 starts when the slowest worker of
// iteration i ends. Workers admitted onto a machine other than the one that
// ran their previous iteration pay the model-transfer surcharge on their
// first iteration after admission.
class GangScheduler : public PolicyEngine {
 public:
  GangScheduler(int num_machines, double mem_per_machine_gb, SchedulerConfig cfg,
                GangPolicy policy);

  void add_job(const JobInstance& job) override;
  void on_tick(Micros now) override;  // Las re-ranks here; others only admit
  std::optional<Micros> next_event() const override;
  void on_event(Micros now) override;
  bool idle() const override;

 private:
  enum class State { Queued, Running, Draining, Done, Failed };

  struct JobRun {
    JobInstance spec;
    State state = State::Queued;
    Micros attained = 0;  // GPU-time consumed, for Las ranking
    int next_iteration = 1;
    std::vector<int> machines;                     // held while Running/Draining
    std::vector<std::optional<int>> prev_machine;  // per worker
    bool fresh_admission = false;                  // surcharge applies to the next iteration
    Micros iteration_started = 0;
    Micros iteration_end = 0;
    Micros finish = 0;
  };

  void admission_pass(Micros now);
  void admit(JobRun& job, Micros now);
  // Runs one iteration (Las) or all remaining iterations (non-preemptive
  // policies); records history and returns the time the job next needs
  // attention.
  void start_running(JobRun& job, Micros now);
  void start_iteration(JobRun& job, Micros now);
  void release(JobRun& job);
  std::vector<int> ranked_queue(bool include_active) const;
  int free_gpus() const;

  SchedulerConfig cfg_;
  GangPolicy policy_;
  int num_machines_;
  double mem_cap_;
  std::vector<int> machine_owner_;  // -1 when free
  std::vector<JobRun> jobs_;
  std::vector<int> job_slot_;
  std::multimap<Micros, int> events_;  // iteration/completion boundaries -> slot
};

}  // namespace jigsaw::sched
