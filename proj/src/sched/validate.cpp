#include "jigsaw/sched/validate.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace jigsaw::sched {

namespace {

std::string describe(const Assignment& a) {
  std::ostringstream os;
  os << "job " << a.job << " worker " << a.worker << " iter " << a.iteration;
  return os.str();
}

}  // namespace

std::vector<std::string> validate_schedule(const std::vector<Assignment>& plan, int num_machines,
                                           double mem_per_machine_gb,
                                           const std::vector<JobInstance>& jobs,
                                           const SchedulerConfig& cfg,
                                           const std::vector<int>& failed_jobs) {
  std::vector<std::string> violations;
  auto complain = [&violations](const std::string& msg) { violations.push_back(msg); };

  std::map<int, const JobInstance*> job_by_index;
  for (const auto& j : jobs) job_by_index[j.index] = &j;
  std::set<int> failed(failed_jobs.begin(), failed_jobs.end());

  // (a) capacity sweep per machine. Interval ends release capacity before
  // same-instant starts claim it.
  struct Edge {
    Micros t;
    int kind;  // 0 = end, 1 = start
    double mem, compute;
  };
  std::vector<std::vector<Edge>> edges(num_machines);
  for (const auto& a : plan) {
    if (a.machine < 0 || a.machine >= num_machines) {
      complain(describe(a) + ": machine out of range");
      continue;
    }
    auto it = job_by_index.find(a.job);
    if (it == job_by_index.end()) {
      complain(describe(a) + ": unknown job");
      continue;
    }
    const auto& d = it->second->demands[a.worker - 1];
    edges[a.machine].push_back({a.start, 1, d.peak_mem_gb, d.compute_fraction});
    edges[a.machine].push_back({a.end, 0, d.peak_mem_gb, d.compute_fraction});
  }
  for (int m = 0; m < num_machines; ++m) {
    auto& ev = edges[m];
    std::sort(ev.begin(), ev.end(), [](const Edge& x, const Edge& y) {
      if (x.t != y.t) return x.t < y.t;
      return x.kind < y.kind;
    });
    double mem = 0.0, compute = 0.0;
    for (const auto& e : ev) {
      if (e.kind == 0) {
        mem -= e.mem;
        compute -= e.compute;
      } else {
        mem += e.mem;
        compute += e.compute;
        if (mem > mem_per_machine_gb + 1e-6)
          complain("machine " + std::to_string(m) + ": memory oversubscribed at t=" +
                   std::to_string(e.t));
        if (compute > 1.0 + 1e-6)
          complain("machine " + std::to_string(m) + ": compute oversubscribed at t=" +
                   std::to_string(e.t));
      }
    }
  }

  // Group by job for dependency / coverage / surcharge checks.
  std::map<int, std::vector<const Assignment*>> by_job;
  for (const auto& a : plan) by_job[a.job].push_back(&a);

  for (const auto& job : jobs) {
    if (failed.count(job.index)) {
      if (by_job.count(job.index))
        complain("job " + std::to_string(job.index) + ": failed job has assignments");
      continue;
    }
    auto it = by_job.find(job.index);
    if (it == by_job.end()) {
      complain("job " + std::to_string(job.index) + ": no assignments");
      continue;
    }
    const auto& rows = it->second;

    // (c) exactly-once coverage.
    std::set<std::pair<int, int>> seen;
    for (const auto* a : rows) {
      if (a->worker < 1 || a->worker > job.workers || a->iteration < 1 ||
          a->iteration > job.total_iterations) {
        complain(describe(*a) + ": out of job bounds");
        continue;
      }
      if (!seen.emplace(a->worker, a->iteration).second)
        complain(describe(*a) + ": duplicated");
    }
    if (static_cast<int>(seen.size()) != job.workers * job.total_iterations)
      complain("job " + std::to_string(job.index) + ": missing worker-iterations");

    // (b) iteration barrier, plus causality against arrival.
    std::vector<Micros> iter_min_start(job.total_iterations + 1, kNever);
    std::vector<Micros> iter_max_end(job.total_iterations + 1, 0);
    for (const auto* a : rows) {
      if (a->iteration < 1 || a->iteration > job.total_iterations) continue;
      iter_min_start[a->iteration] = std::min(iter_min_start[a->iteration], a->start);
      iter_max_end[a->iteration] = std::max(iter_max_end[a->iteration], a->end);
    }
    if (iter_min_start[1] < job.arrival)
      complain("job " + std::to_string(job.index) + ": starts before arrival");
    for (int i = 2; i <= job.total_iterations; ++i) {
      if (iter_min_start[i] < iter_max_end[i - 1])
        complain("job " + std::to_string(job.index) + ": iteration " + std::to_string(i) +
                 " starts before iteration " + std::to_string(i - 1) + " ends");
    }

    // (d) durations and migration surcharges.
    Micros surcharge = cfg.surcharge_us(job.grad_size_mb);
    std::map<int, std::vector<const Assignment*>> by_worker;
    for (const auto* a : rows) by_worker[a->worker].push_back(a);
    for (auto& [w, list] : by_worker) {
      std::sort(list.begin(), list.end(), [](const Assignment* x, const Assignment* y) {
        return x->iteration < y->iteration;
      });
      int prev_machine = -1;
      for (const auto* a : list) {
        bool should_migrate = prev_machine >= 0 && a->machine != prev_machine;
        if (a->migrated != should_migrate)
          complain(describe(*a) + ": migration flag wrong");
        Micros expected = job.demands[a->worker - 1].duration_us() +
                          (should_migrate ? surcharge : 0);
        if (a->end - a->start != expected)
          complain(describe(*a) + ": duration " + std::to_string(a->end - a->start) +
                   " != expected " + std::to_string(expected));
        prev_machine = a->machine;
      }
    }
  }

  return violations;
}

}  // namespace jigsaw::sched
