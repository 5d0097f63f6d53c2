#include "jigsaw/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "jigsaw/errors.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw::oracle {

namespace {

struct SearchTask {
  int job;
  int worker;  // 1-based
  Micros duration;
};

class Search {
 public:
  Search(const std::vector<JobInstance>& jobs, int machines, const sched::SchedulerConfig& cfg)
      : jobs_(jobs), num_machines_(machines) {
    machine_free_.assign(machines, 0);
    first_use_.assign(machines, true);
    int n = static_cast<int>(jobs.size());
    next_iteration_.assign(n, 1);
    unscheduled_in_iter_.resize(n);
    iter_end_.resize(n);
    job_ready_.resize(n);
    prev_machine_.resize(n);
    surcharge_.resize(n);
    remaining_chain_.resize(n);
    for (int j = 0; j < n; ++j) {
      unscheduled_in_iter_[j] = (1u << jobs[j].workers) - 1;
      iter_end_[j] = jobs[j].arrival;
      job_ready_[j] = jobs[j].arrival;
      prev_machine_[j].assign(jobs[j].workers, -1);
      surcharge_[j] = cfg.surcharge_us(jobs[j].grad_size_mb);
      // Critical-path lower bound per remaining iteration: the slowest
      // worker, migration-free.
      Micros slowest = 0;
      for (const auto& d : jobs[j].demands) slowest = std::max(slowest, d.duration_us());
      remaining_chain_[j] = slowest;
      total_remaining_ += [&] {
        Micros sum = 0;
        for (const auto& d : jobs[j].demands) sum += d.duration_us();
        return sum * jobs[j].total_iterations;
      }();
      tasks_left_ += jobs[j].workers * jobs[j].total_iterations;
    }
    best_plan_.reserve(tasks_left_);
    current_plan_.reserve(tasks_left_);
  }

  OptimalPlan run(Micros incumbent) {
    best_ = incumbent;
    dfs(0);
    OptimalPlan out;
    out.makespan = best_;
    out.plan = best_plan_;
    out.nodes_explored = nodes_;
    return out;
  }

 private:
  Micros lower_bound(Micros current_makespan) const {
    Micros lb = current_makespan;
    // Chain bound: each job still needs its remaining iterations in series.
    for (size_t j = 0; j < jobs_.size(); ++j) {
      if (next_iteration_[j] > jobs_[j].total_iterations) continue;
      int iters_after = jobs_[j].total_iterations - next_iteration_[j];
      // In-flight iteration: committed ends, and every unscheduled worker
      // still needs its migration-free duration past the barrier.
      Micros inflight = iter_end_[j];
      unsigned mask = unscheduled_in_iter_[j];
      for (int w = 1; w <= jobs_[j].workers; ++w)
        if (mask & (1u << (w - 1)))
          inflight = std::max(inflight, job_ready_[j] + jobs_[j].demands[w - 1].duration_us());
      lb = std::max(lb, inflight + static_cast<Micros>(iters_after) * remaining_chain_[j]);
    }
    // Volume bound: remaining work spread over all machines.
    Micros free_sum = 0;
    for (Micros f : machine_free_) free_sum += f;
    lb = std::max(lb, (free_sum + total_remaining_ + num_machines_ - 1) / num_machines_);
    return lb;
  }

  void dfs(Micros current_makespan) {
    ++nodes_;
    if (tasks_left_ == 0) {
      if (current_makespan < best_) {
        best_ = current_makespan;
        best_plan_ = current_plan_;
      }
      return;
    }
    if (lower_bound(current_makespan) >= best_) return;

    for (int j = 0; j < static_cast<int>(jobs_.size()); ++j) {
      if (next_iteration_[j] > jobs_[j].total_iterations) continue;
      unsigned mask = unscheduled_in_iter_[j];
      for (int w = 1; w <= jobs_[j].workers; ++w) {
        if (!(mask & (1u << (w - 1)))) continue;
        // Workers of one iteration with identical duration and affinity are
        // interchangeable; branch only the lowest id.
        bool dominated = false;
        for (int w2 = 1; w2 < w; ++w2) {
          if (!(mask & (1u << (w2 - 1)))) continue;
          if (jobs_[j].demands[w2 - 1].duration_us() == jobs_[j].demands[w - 1].duration_us() &&
              prev_machine_[j][w2 - 1] == prev_machine_[j][w - 1]) {
            dominated = true;
            break;
          }
        }
        if (dominated) continue;
        branch_task(j, w, current_makespan);
      }
    }
  }

  void branch_task(int j, int w, Micros current_makespan) {
    const auto& job = jobs_[j];
    Micros base = job.demands[w - 1].duration_us();
    bool used_fresh_machine = false;
    for (int m = 0; m < num_machines_; ++m) {
      // Symmetry: among never-used machines only the lowest index matters.
      bool fresh = machine_free_[m] == 0 && first_use_[m];
      if (fresh) {
        if (used_fresh_machine) continue;
        used_fresh_machine = true;
      }
      int prev = prev_machine_[j][w - 1];
      Micros dur = base + ((prev >= 0 && prev != m) ? surcharge_[j] : 0);
      Micros start = std::max(machine_free_[m], job_ready_[j]);
      Micros end = start + dur;

      // Commit.
      Micros saved_free = machine_free_[m];
      bool saved_first = first_use_[m];
      Micros saved_iter_end = iter_end_[j];
      Micros saved_ready = job_ready_[j];
      int saved_next = next_iteration_[j];
      unsigned saved_mask = unscheduled_in_iter_[j];
      Micros saved_total = total_remaining_;

      machine_free_[m] = end;
      first_use_[m] = false;
      iter_end_[j] = std::max(iter_end_[j], end);
      unscheduled_in_iter_[j] &= ~(1u << (w - 1));
      total_remaining_ -= base;
      current_plan_.push_back({j, w, saved_next, m, start, end,
                               prev >= 0 && prev != m});
      prev_machine_[j][w - 1] = m;
      bool iteration_done = unscheduled_in_iter_[j] == 0;
      if (iteration_done) {
        next_iteration_[j] += 1;
        job_ready_[j] = iter_end_[j];
        if (next_iteration_[j] <= job.total_iterations)
          unscheduled_in_iter_[j] = (1u << job.workers) - 1;
      }
      --tasks_left_;

      dfs(std::max(current_makespan, end));

      // Undo.
      ++tasks_left_;
      prev_machine_[j][w - 1] = prev;
      current_plan_.pop_back();
      total_remaining_ = saved_total;
      unscheduled_in_iter_[j] = saved_mask;
      next_iteration_[j] = saved_next;
      job_ready_[j] = saved_ready;
      iter_end_[j] = saved_iter_end;
      first_use_[m] = saved_first;
      machine_free_[m] = saved_free;
    }
  }

  const std::vector<JobInstance>& jobs_;
  int num_machines_;
  std::vector<Micros> machine_free_;
  std::vector<bool> first_use_;
  std::vector<int> next_iteration_;
  std::vector<unsigned> unscheduled_in_iter_;
  std::vector<Micros> iter_end_;    // max end within the in-flight iteration
  std::vector<Micros> job_ready_;   // when the in-flight iteration became ready
  std::vector<std::vector<int>> prev_machine_;
  std::vector<Micros> surcharge_;
  std::vector<Micros> remaining_chain_;
  Micros total_remaining_ = 0;
  int tasks_left_ = 0;
  Micros best_ = sched::kNever;
  std::vector<Assignment> best_plan_;
  std::vector<Assignment> current_plan_;
  long long nodes_ = 0;
};

}  // namespace

OptimalPlan optimal_makespan(const std::vector<JobInstance>& jobs, int num_machines,
                             double mem_per_machine_gb, const sched::SchedulerConfig& cfg,
                             Micros incumbent_hint) {
  if (jobs.empty()) throw ArgumentError("oracle: empty instance");
  if (jobs.size() > 4) throw ArgumentError("oracle: at most 4 jobs");
  if (num_machines < 1 || num_machines > 3) throw ArgumentError("oracle: 1..3 machines");
  int tasks = 0;
  for (const auto& j : jobs) {
    if (j.total_iterations > 3) throw ArgumentError("oracle: at most 3 iterations per job");
    if (j.workers > 8) throw ArgumentError("oracle: at most 8 workers per job");
    for (const auto& d : j.demands) {
      if (d.compute_fraction != 1.0)
        throw ArgumentError("oracle: only whole-GPU tasks are supported");
      if (d.peak_mem_gb > mem_per_machine_gb)
        throw ArgumentError("oracle: task does not fit any machine");
    }
    tasks += j.workers * j.total_iterations;
  }
  if (tasks > 18) throw ArgumentError("oracle: instance too large (more than 18 tasks)");

  Search search(jobs, num_machines, cfg);
  // A fresh hint is exclusive: the oracle may simply confirm it.
  return search.run(incumbent_hint == sched::kNever ? sched::kNever : incumbent_hint + 1);
}

CoverageCounts coverage_oracle(int k, int L) {
  if (k < 1 || k > 64 || L < 1 || L > 64) throw ArgumentError("coverage_oracle: k, L in 1..64");
  CoverageCounts out;
  out.per_layer.assign(L, 0);
  for (int j = 1; j <= k; ++j) {
    int s = spb::suffix_layers(j, k, L);
    for (int layer = L - s + 1; layer <= L; ++layer) out.per_layer[layer - 1] += 1;
  }
  for (int layer = 0; layer < L; ++layer) {
    if (layer == 0 || out.per_layer[layer] != out.per_layer[layer - 1])
      out.per_chunk.push_back(out.per_layer[layer]);
  }
  return out;
}

OracleVariance variance_oracle(const spb::LayeredModel& model, const spb::SpbConfig& cfg,
                               const spb::Params& x, int trials, std::uint64_t seed) {
  cfg.validate();
  if (trials < 1) throw ArgumentError("variance_oracle: trials must be >= 1");
  const int L = model.layer_count();
  const int k = cfg.k;
  const int per_worker = cfg.B / k;
  const auto spans = spb::chunk_layout(k, L);
  const spb::Params grad = spb::full_gradient(model, x);

  Rng root(seed);
  Rng worker_draws = root.split(spb::kWorkerDrawTag);

  double sum = 0.0, sumsq = 0.0;
  std::vector<spb::Params> worker_means(k);
  for (int r = 1; r <= trials; ++r) {
    Rng stream = worker_draws.split(r);
    // Each worker's mini-batch mean over the layers its suffix covers.
    for (int j = 1; j <= k; ++j) {
      Rng wrng = stream.split(j);
      int suffix = spb::suffix_layers(j, k, L);
      auto& mean = worker_means[j - 1];
      mean = model.zeros_like();
      for (int b = 0; b < per_worker; ++b) {
        int sample = static_cast<int>(wrng.next_below(model.dataset_size()));
        model.add_sample_gradient(x, sample, suffix, mean);
      }
      for (int l = L - suffix; l < L; ++l)
        for (double& v : mean[l]) v *= 1.0 / per_worker;
    }
    // Squared deviation, chunk by chunk: chunk m is the average over its m
    // contributing workers.
    double dev = 0.0;
    for (int m = 1; m <= k; ++m) {
      auto workers = spb::chunk_coverage(m, k);
      for (int l = spans[m - 1].first; l <= spans[m - 1].second; ++l) {
        size_t dim = grad[l - 1].size();
        for (size_t c = 0; c < dim; ++c) {
          double avg = 0.0;
          for (int w : workers) avg += worker_means[w - 1][l - 1][c];
          avg /= static_cast<double>(m);
          double d = grad[l - 1][c] - avg;
          dev += d * d;
        }
      }
    }
    sum += dev;
    sumsq += dev * dev;
  }
  OracleVariance out;
  out.spb = sum / trials;
  out.spb_se = std::sqrt(std::max(0.0, sumsq / trials - out.spb * out.spb) / trials);

  // Per-chunk p_i from fresh single-sample draws.
  Rng chunk_draws = root.split(spb::kChunkDrawTag);
  out.p_hat.assign(k, 0.0);
  out.p_se.assign(k, 0.0);
  for (int m = 1; m <= k; ++m) {
    Rng stream = chunk_draws.split(m);
    double psum = 0.0, psumsq = 0.0;
    spb::Params g = model.zeros_like();
    for (int r = 1; r <= trials; ++r) {
      int sample = static_cast<int>(stream.next_below(model.dataset_size()));
      for (auto& blk : g)
        for (double& v : blk) v = 0.0;
      model.add_sample_gradient(x, sample, L, g);
      double d = 0.0;
      for (int l = spans[m - 1].first; l <= spans[m - 1].second; ++l)
        for (size_t c = 0; c < g[l - 1].size(); ++c) {
          double diff = grad[l - 1][c] - g[l - 1][c];
          d += diff * diff;
        }
      psum += d;
      psumsq += d * d;
    }
    out.p_hat[m - 1] = psum / trials;
    out.p_se[m - 1] =
        std::sqrt(std::max(0.0, psumsq / trials - out.p_hat[m - 1] * out.p_hat[m - 1]) / trials);
  }
  for (int m = 1; m <= k; ++m) {
    double w = static_cast<double>(k) / (static_cast<double>(m) * cfg.B);
    out.harmonic_sum += w * out.p_hat[m - 1];
    out.harmonic_sum_se += w * w * out.p_se[m - 1] * out.p_se[m - 1];
  }
  out.harmonic_sum_se = std::sqrt(out.harmonic_sum_se);
  return out;
}

}  // namespace jigsaw::oracle
