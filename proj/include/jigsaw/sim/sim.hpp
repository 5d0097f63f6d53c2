#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jigsaw/cost/profile.hpp"
#include "jigsaw/sched/types.hpp"

namespace jigsaw::sim {

using sched::Assignment;
using sched::JobDag;
using sched::JobInstance;
using sched::Micros;

struct ClusterConfig {
  int num_gpus = 45;
  double mem_per_gpu_gb = 16.0;  // V100 class
};

enum class Policy { Jigsaw, Gang, Las, Packing, Random };

std::string policy_name(Policy p);
Policy parse_policy(const std::string& name);  // ArgumentError on unknown names

struct SimOptions {
  sched::SchedulerConfig sched;
  // Baselines gang-schedule whole jobs with full-backprop demands (their
  // interfaces assume equal workers). Turn off to let gang scheduling keep
  // per-worker partial-backprop demands.
  bool baselines_full_backprop = true;
  std::uint64_t seed = 0;  // placement seed for the Random ablation
};

struct JobMetrics {
  std::string job_id;
  Micros arrival = 0;
  Micros finish = 0;
  Micros jct = 0;
  int migrations = 0;
  int worker_iterations = 0;
  double migration_fraction = 0.0;
  bool failed = false;
};

struct MetricsReport {
  std::string policy;
  Micros makespan = 0;  // end time of the last job to finish
  std::vector<JobMetrics> jobs;        // trace order
  std::vector<Assignment> history;     // executed worker-iterations
  std::vector<JobInstance> instances;  // demands the run used (for validation)
  int failed_jobs = 0;
};

// Builds JobInstances from a trace, resolving demands against the profile
// table. When full_backprop is set every worker gets the fraction-1.0 demand
// regardless of the job's flags.
std::vector<JobInstance> resolve_jobs(const std::vector<JobDag>& trace,
                                      const cost::ProfileTable& profiles,
                                      const sched::SchedulerConfig& cfg, bool full_backprop);

// Deterministic discrete-event run of one policy over a trace. Events are
// processed in (time, kind, sequence) order with task completions first,
// then scheduling ticks, then arrivals, so freed capacity is visible in the
// same instant. A scheduling pass is also forced at every arrival.
MetricsReport run(const std::vector<JobDag>& trace, const cost::ProfileTable& profiles,
                  Policy policy, const ClusterConfig& cluster, const SimOptions& opts);

// Same, over pre-resolved instances (used by the oracle comparisons).
MetricsReport run_instances(const std::vector<JobInstance>& jobs, Policy policy,
                            const ClusterConfig& cluster, const SimOptions& opts);

}  // namespace jigsaw::sim
