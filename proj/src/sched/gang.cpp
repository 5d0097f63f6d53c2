#include "jigsaw/sched/gang.hpp"

#include <algorithm>

#include "jigsaw/errors.hpp"

namespace jigsaw::sched {

GangScheduler::GangScheduler(int num_machines, double mem_per_machine_gb, SchedulerConfig cfg,
                             GangPolicy policy)
    : cfg_(cfg), policy_(policy), num_machines_(num_machines), mem_cap_(mem_per_machine_gb),
      machine_owner_(num_machines, -1) {
  if (num_machines < 1) throw ArgumentError("scheduler: need at least one machine");
}

int GangScheduler::free_gpus() const {
  return static_cast<int>(std::count(machine_owner_.begin(), machine_owner_.end(), -1));
}

void GangScheduler::add_job(const JobInstance& job) {
  if (static_cast<int>(job_slot_.size()) <= job.index) job_slot_.resize(job.index + 1, -1);
  job_slot_[job.index] = static_cast<int>(jobs_.size());
  JobRun run;
  run.spec = job;
  run.prev_machine.assign(job.workers, std::nullopt);
  double worst_mem = 0.0;
  for (const auto& d : job.demands) worst_mem = std::max(worst_mem, d.peak_mem_gb);
  if (job.workers > num_machines_ || worst_mem > mem_cap_ + 1e-9) {
    run.state = State::Failed;
    failed_jobs_.push_back(job.index);
    jobs_.push_back(std::move(run));
    return;
  }
  jobs_.push_back(std::move(run));
  admission_pass(job.arrival);
}

std::vector<int> GangScheduler::ranked_queue(bool include_active) const {
  std::vector<int> slots;
  for (int s = 0; s < static_cast<int>(jobs_.size()); ++s) {
    State st = jobs_[s].state;
    if (st == State::Queued || (include_active && (st == State::Running || st == State::Draining)))
      slots.push_back(s);
  }
  auto by_arrival = [this](int a, int b) {
    if (jobs_[a].spec.arrival != jobs_[b].spec.arrival)
      return jobs_[a].spec.arrival < jobs_[b].spec.arrival;
    return jobs_[a].spec.index < jobs_[b].spec.index;
  };
  switch (policy_) {
    case GangPolicy::Fifo:
      std::sort(slots.begin(), slots.end(), by_arrival);
      break;
    case GangPolicy::Packing:
      // First fit decreasing: biggest jobs first.
      std::sort(slots.begin(), slots.end(), [&](int a, int b) {
        const auto& ja = jobs_[a].spec;
        const auto& jb = jobs_[b].spec;
        if (ja.workers != jb.workers) return ja.workers > jb.workers;
        double da = ja.demands.front().duration_ms, db = jb.demands.front().duration_ms;
        if (da != db) return da > db;
        return by_arrival(a, b);
      });
      break;
    case GangPolicy::Las:
      std::sort(slots.begin(), slots.end(), [&](int a, int b) {
        if (jobs_[a].attained != jobs_[b].attained) return jobs_[a].attained < jobs_[b].attained;
        return by_arrival(a, b);
      });
      break;
  }
  return slots;
}

void GangScheduler::admission_pass(Micros now) {
  int free = free_gpus();
  for (int slot : ranked_queue(/*include_active=*/false)) {
    JobRun& job = jobs_[slot];
    if (job.spec.workers > free) {
      if (policy_ == GangPolicy::Fifo) break;  // strict head-of-line
      continue;
    }
    admit(job, now);
    free -= job.spec.workers;
  }
}

void GangScheduler::admit(JobRun& job, Micros now) {
  job.machines.assign(job.spec.workers, -1);
  std::vector<bool> claimed(num_machines_, false);
  // Affinity first: reuse each worker's previous machine when it is free.
  for (int w = 0; w < job.spec.workers; ++w) {
    auto prev = job.prev_machine[w];
    if (prev && machine_owner_[*prev] == -1 && !claimed[*prev]) {
      job.machines[w] = *prev;
      claimed[*prev] = true;
    }
  }
  int next_free = 0;
  for (int w = 0; w < job.spec.workers; ++w) {
    if (job.machines[w] >= 0) continue;
    while (machine_owner_[next_free] != -1 || claimed[next_free]) ++next_free;
    job.machines[w] = next_free;
    claimed[next_free] = true;
  }
  for (int m : job.machines) machine_owner_[m] = job.spec.index;
  job.state = State::Running;
  job.fresh_admission = true;
  start_iteration(job, now);
}

void GangScheduler::start_iteration(JobRun& job, Micros now) {
  Micros max_end = now;
  for (int w = 0; w < job.spec.workers; ++w) {
    Micros dur = job.spec.demands[w].duration_us();
    bool migrated = job.fresh_admission && job.prev_machine[w] &&
                    *job.prev_machine[w] != job.machines[w];
    if (migrated) dur += cfg_.surcharge_us(job.spec.grad_size_mb);
    Micros end = now + dur;
    history_.push_back({job.spec.index, w + 1, job.next_iteration, job.machines[w], now, end,
                        migrated});
    max_end = std::max(max_end, end);
  }
  job.fresh_admission = false;
  job.iteration_started = now;
  job.iteration_end = max_end;
  events_.emplace(max_end, job_slot_[job.spec.index]);
}

void GangScheduler::release(JobRun& job) {
  for (int w = 0; w < job.spec.workers; ++w) {
    job.prev_machine[w] = job.machines[w];
    machine_owner_[job.machines[w]] = -1;
  }
  job.machines.clear();
}

std::optional<Micros> GangScheduler::next_event() const {
  if (events_.empty()) return std::nullopt;
  return events_.begin()->first;
}

void GangScheduler::on_event(Micros now) {
  bool released_any = false;
  while (!events_.empty() && events_.begin()->first <= now) {
    int slot = events_.begin()->second;
    events_.erase(events_.begin());
    JobRun& job = jobs_[slot];
    job.attained +=
        static_cast<Micros>(job.spec.workers) * (job.iteration_end - job.iteration_started);
    job.next_iteration += 1;
    if (job.next_iteration > job.spec.total_iterations) {
      job.state = State::Done;
      job.finish = job.iteration_end;
      release(job);
      released_any = true;
    } else if (job.state == State::Draining) {
      job.state = State::Queued;
      release(job);
      released_any = true;
    } else {
      start_iteration(job, job.iteration_end);
    }
  }
  if (released_any) admission_pass(now);
}

void GangScheduler::on_tick(Micros now) {
  if (policy_ == GangPolicy::Las) {
    // Quantum boundary: the jobs with least attained service get the GPUs;
    // running jobs squeezed out drain at their current iteration boundary.
    int capacity = num_machines_;
    std::vector<bool> in_target(jobs_.size(), false);
    for (int slot : ranked_queue(/*include_active=*/true)) {
      if (jobs_[slot].spec.workers <= capacity) {
        in_target[slot] = true;
        capacity -= jobs_[slot].spec.workers;
      }
    }
    for (size_t s = 0; s < jobs_.size(); ++s) {
      if (jobs_[s].state == State::Running && !in_target[s]) jobs_[s].state = State::Draining;
      else if (jobs_[s].state == State::Draining && in_target[s]) jobs_[s].state = State::Running;
    }
  }
  admission_pass(now);
}

bool GangScheduler::idle() const {
  for (const auto& job : jobs_) {
    State st = job.state;
    if (st == State::Queued || st == State::Running || st == State::Draining) return false;
  }
  return true;
}

}  // namespace jigsaw::sched
