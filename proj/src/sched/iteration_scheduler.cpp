#include "jigsaw/sched/iteration_scheduler.hpp"

#include <algorithm>

#include "jigsaw/errors.hpp"

namespace jigsaw::sched {

IterationScheduler::IterationScheduler(int num_machines, double mem_per_machine_gb,
                                       SchedulerConfig cfg, Placement placement,
                                       std::uint64_t seed)
    : cfg_(cfg), placement_(placement), rng_(Rng(seed).split(0x97ACEULL)) {
  if (num_machines < 1) throw ArgumentError("scheduler: need at least one machine");
  machines_.reserve(num_machines);
  for (int m = 0; m < num_machines; ++m)
    machines_.emplace_back(m, mem_per_machine_gb, cfg.max_coresident_tasks);
}

double IterationScheduler::demand_product(const cost::TaskDemand& d) const {
  double p = d.peak_mem_gb * d.duration_ms;
  if (cfg_.priority_includes_compute) p *= d.compute_fraction;
  return p;
}

TaskSpec IterationScheduler::make_task(const JobState& js, int worker) const {
  TaskSpec t;
  t.job = js.spec.index;
  t.worker = worker;
  t.iteration = js.current_iteration;
  t.demand = js.spec.demands[worker - 1];
  t.prev_machine = js.prev_machine[worker - 1];
  t.ready_time = js.iteration_end;
  return t;
}

void IterationScheduler::enqueue_iteration(int job) {
  JobState& js = jobs_[job_slot_[job]];
  js.unplaced = js.spec.workers;
  for (int w = 1; w <= js.spec.workers; ++w) {
    TaskSpec t = make_task(js, w);
    queue_.emplace(QueueKey{demand_product(t.demand), t.job, t.worker}, std::move(t));
  }
}

void IterationScheduler::add_job(const JobInstance& job) {
  if (static_cast<int>(job_slot_.size()) <= job.index) job_slot_.resize(job.index + 1, -1);
  job_slot_[job.index] = static_cast<int>(jobs_.size());
  JobState js;
  js.spec = job;
  js.prev_machine.assign(job.workers, std::nullopt);
  js.current_iteration = 1;
  js.iteration_end = job.arrival;  // iteration 1 is ready at arrival
  jobs_.push_back(std::move(js));
  enqueue_iteration(job.index);
  plan_interval(job.arrival);  // scheduling pass forced on arrival
}

void IterationScheduler::fail_job(int job) {
  JobState& js = jobs_[job_slot_[job]];
  js.failed = true;
  failed_jobs_.push_back(job);
  for (auto it = queue_.begin(); it != queue_.end();) {
    if (it->second.job == job)
      it = queue_.erase(it);
    else
      ++it;
  }
}

QueueStats IterationScheduler::queue_stats() const {
  QueueStats s;
  for (const auto& [key, task] : queue_) {
    s.max_mem_gb = std::max(s.max_mem_gb, task.demand.peak_mem_gb);
    s.max_duration_ms = std::max(s.max_duration_ms, task.demand.duration_ms);
    s.max_compute = std::max(s.max_compute, task.demand.compute_fraction);
  }
  return s;
}

std::vector<Assignment> IterationScheduler::plan_interval(Micros now) {
  const Micros horizon = now + cfg_.interval_us();
  std::vector<std::pair<QueueKey, TaskSpec>> deferred;
  std::vector<Assignment> placed;

  while (!queue_.empty()) {
    auto top = queue_.begin();
    QueueKey key = top->first;
    TaskSpec task = std::move(top->second);
    queue_.erase(top);
    JobState& js = jobs_[job_slot_[task.job]];

    // Feasibility is memory-only: a task that fits no machine fails its job.
    bool fits_somewhere = false;
    for (const auto& m : machines_)
      if (task.demand.peak_mem_gb <= m.mem_capacity_gb() + 1e-9) fits_somewhere = true;
    if (!fits_somewhere) {
      fail_job(task.job);
      continue;
    }

    // Pick a machine: greedy earliest start, or a random feasible one for
    // the ablation mode. The search stops at the planning horizon; a task
    // that cannot start inside it stays queued for the next interval.
    int best_machine = -1;
    StartOption best{};
    if (placement_ == Placement::EarliestStart) {
      for (const auto& m : machines_) {
        auto opt = earliest_start(task, m, cfg_, js.spec.grad_size_mb, horizon);
        if (!opt) continue;
        bool better = false;
        if (best_machine < 0) {
          better = true;
        } else if (opt->start != best.start) {
          better = opt->start < best.start;
        } else {
          bool this_prev = task.prev_machine && *task.prev_machine == m.id();
          bool best_prev = task.prev_machine && *task.prev_machine == best_machine;
          better = this_prev && !best_prev;  // equal starts: affinity, then lowest id
        }
        if (better) {
          best_machine = m.id();
          best = *opt;
        }
      }
    } else {
      std::vector<int> feasible;
      for (const auto& m : machines_)
        if (task.demand.peak_mem_gb <= m.mem_capacity_gb() + 1e-9) feasible.push_back(m.id());
      int pick = feasible[rng_.next_below(feasible.size())];
      auto opt = earliest_start(task, machines_[pick], cfg_, js.spec.grad_size_mb, horizon);
      if (opt) {
        best_machine = pick;
        best = *opt;
      }
    }

    if (best_machine < 0) {
      deferred.emplace_back(key, std::move(task));
      continue;
    }

    Micros end = best.start + best.effective_duration;
    machines_[best_machine].reserve(best.start, end, task.demand.peak_mem_gb,
                                    task.demand.compute_fraction);
    bool migrated = task.prev_machine.has_value() && *task.prev_machine != best_machine;
    Assignment a{task.job, task.worker, task.iteration, best_machine, best.start, end, migrated};
    placed.push_back(a);
    history_.push_back(a);

    js.prev_machine[task.worker - 1] = best_machine;
    js.iteration_end = std::max(js.iteration_end, end);
    if (--js.unplaced == 0 && js.current_iteration < js.spec.total_iterations) {
      // Iteration complete: synthesize the next one, one iteration ahead.
      js.current_iteration += 1;
      enqueue_iteration(js.spec.index);
    }
  }

  for (auto& [key, task] : deferred) {
    if (jobs_[job_slot_[task.job]].failed) continue;
    queue_.emplace(key, std::move(task));
  }
  return placed;
}

void IterationScheduler::on_tick(Micros now) { plan_interval(now); }

bool IterationScheduler::idle() const { return queue_.empty(); }

}  // namespace jigsaw::sched
