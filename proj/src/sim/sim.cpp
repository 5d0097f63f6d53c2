#include "jigsaw/sim/sim.hpp"

#include <algorithm>
#include <map>
#include <memory>

#include "jigsaw/errors.hpp"
#include "jigsaw/sched/gang.hpp"
#include "jigsaw/sched/iteration_scheduler.hpp"

namespace jigsaw::sim {

std::string policy_name(Policy p) {
  switch (p) {
    case Policy::Jigsaw: return "jigsaw";
    case Policy::Gang: return "gang";
    case Policy::Las: return "las";
    case Policy::Packing: return "packing";
    case Policy::Random: return "random";
  }
  return "?";
}

Policy parse_policy(const std::string& name) {
  if (name == "jigsaw") return Policy::Jigsaw;
  if (name == "gang") return Policy::Gang;
  if (name == "las") return Policy::Las;
  if (name == "packing") return Policy::Packing;
  if (name == "random") return Policy::Random;
  throw ArgumentError("unknown policy: " + name);
}

std::vector<JobInstance> resolve_jobs(const std::vector<JobDag>& trace,
                                      const cost::ProfileTable& profiles,
                                      const sched::SchedulerConfig& cfg, bool full_backprop) {
  std::vector<JobInstance> out;
  out.reserve(trace.size());
  for (size_t i = 0; i < trace.size(); ++i) {
    const JobDag& dag = trace[i];
    const auto& entry = profiles.get(dag.model_name);
    JobInstance job;
    job.index = static_cast<int>(i);
    job.job_id = dag.job_id;
    job.arrival = dag.arrival;
    job.workers = dag.workers;
    job.total_iterations = dag.total_iterations;
    job.grad_size_mb = entry.grad_size_mb;
    job.demands.reserve(dag.workers);
    for (int w = 0; w < dag.workers; ++w) {
      double fraction = full_backprop ? 1.0 : dag.fractions[w];
      job.demands.push_back(cost::task_demand(entry, fraction, cfg.comm_ms_per_mb));
    }
    out.push_back(std::move(job));
  }
  return out;
}

MetricsReport run_instances(const std::vector<JobInstance>& jobs, Policy policy,
                            const ClusterConfig& cluster, const SimOptions& opts) {
  std::unique_ptr<sched::PolicyEngine> engine;
  switch (policy) {
    case Policy::Jigsaw:
      engine = std::make_unique<sched::IterationScheduler>(
          cluster.num_gpus, cluster.mem_per_gpu_gb, opts.sched);
      break;
    case Policy::Random:
      engine = std::make_unique<sched::IterationScheduler>(
          cluster.num_gpus, cluster.mem_per_gpu_gb, opts.sched,
          sched::Placement::RandomFeasible, opts.seed);
      break;
    case Policy::Gang:
      engine = std::make_unique<sched::GangScheduler>(cluster.num_gpus, cluster.mem_per_gpu_gb,
                                                      opts.sched, sched::GangPolicy::Fifo);
      break;
    case Policy::Las:
      engine = std::make_unique<sched::GangScheduler>(cluster.num_gpus, cluster.mem_per_gpu_gb,
                                                      opts.sched, sched::GangPolicy::Las);
      break;
    case Policy::Packing:
      engine = std::make_unique<sched::GangScheduler>(cluster.num_gpus, cluster.mem_per_gpu_gb,
                                                      opts.sched, sched::GangPolicy::Packing);
      break;
  }

  // Event loop. Completions, ticks and arrivals at the same instant are
  // processed in that order.
  const Micros interval = opts.sched.interval_us();
  size_t next_arrival = 0;
  Micros next_tick = 0;
  while (true) {
    Micros t_event = engine->next_event().value_or(sched::kNever);
    Micros t_arrival = next_arrival < jobs.size() ? jobs[next_arrival].arrival : sched::kNever;
    bool tick_needed = !engine->idle() || next_arrival < jobs.size();
    Micros t_tick = tick_needed ? next_tick : sched::kNever;
    Micros t = std::min({t_event, t_arrival, t_tick});
    if (t >= sched::kNever) break;
    if (t_event == t) {
      engine->on_event(t);
    } else if (t_tick == t) {
      engine->on_tick(t);
      next_tick += interval;
    } else {
      // add_job runs the policy's arrival pass internally (forced tick).
      engine->add_job(jobs[next_arrival++]);
    }
  }

  // Metrics from the executed history.
  MetricsReport report;
  report.policy = policy_name(policy);
  report.instances = jobs;
  report.history = engine->history();
  report.failed_jobs = static_cast<int>(engine->failed_jobs().size());

  std::vector<JobMetrics> metrics(jobs.size());
  for (size_t i = 0; i < jobs.size(); ++i) {
    metrics[i].job_id = jobs[i].job_id;
    metrics[i].arrival = jobs[i].arrival;
    metrics[i].worker_iterations = jobs[i].workers * jobs[i].total_iterations;
  }
  for (int f : engine->failed_jobs()) metrics[f].failed = true;
  for (const auto& a : report.history) {
    auto& m = metrics[a.job];
    m.finish = std::max(m.finish, a.end);
    if (a.migrated) m.migrations += 1;
  }
  Micros makespan = 0;
  for (auto& m : metrics) {
    if (m.failed) continue;
    m.jct = m.finish - m.arrival;
    m.migration_fraction =
        m.worker_iterations > 0 ? static_cast<double>(m.migrations) / m.worker_iterations : 0.0;
    makespan = std::max(makespan, m.finish);
  }
  report.makespan = makespan;
  report.jobs = std::move(metrics);
  return report;
}

MetricsReport run(const std::vector<JobDag>& trace, const cost::ProfileTable& profiles,
                  Policy policy, const ClusterConfig& cluster, const SimOptions& opts) {
  for (size_t i = 1; i < trace.size(); ++i)
    if (trace[i].arrival < trace[i - 1].arrival)
      throw ArgumentError("trace must be sorted by arrival time");
  bool iteration_level = policy == Policy::Jigsaw || policy == Policy::Random;
  bool full = !iteration_level && opts.baselines_full_backprop;
  auto jobs = resolve_jobs(trace, profiles, opts.sched, full);
  return run_instances(jobs, policy, cluster, opts);
}

}  // namespace jigsaw::sim
