#pragma once

#include <cstdint>
#include <vector>

#include "jigsaw/sched/types.hpp"
#include "jigsaw/spb/spb.hpp"

namespace jigsaw::oracle {

using sched::Assignment;
using sched::JobInstance;
using sched::Micros;

// --- Exact makespan on tiny instances ---------------------------------------

struct OptimalPlan {
  Micros makespan = 0;
  std::vector<Assignment> plan;
  long long nodes_explored = 0;
};

// Exhaustive branch-and-bound over (task order x machine assignment) under
// the same semantics as the online scheduler: iteration barriers, exclusive
// machines, and the migration surcharge when a worker changes machine.
// Instances are limited to <= 4 jobs, <= 3 iterations each, <= 3 machines,
// <= 18 tasks, and compute_fraction == 1 on every task; anything larger is
// refused with an ArgumentError. `incumbent_hint` (e.g. a heuristic plan's
// makespan) seeds the pruning bound.
OptimalPlan optimal_makespan(const std::vector<JobInstance>& jobs, int num_machines,
                             double mem_per_machine_gb, const sched::SchedulerConfig& cfg,
                             Micros incumbent_hint = sched::kNever);

// --- Coverage enumeration ----------------------------------------------------

struct CoverageCounts {
  std::vector<int> per_layer;  // contributors of each layer, input side first
  std::vector<int> per_chunk;  // per_layer grouped into runs of equal counts
};

// Counts contributors per layer directly from the suffix rule, independent of
// the chunk bookkeeping it is used to check. With k dividing L the per-chunk
// counts are exactly (1, 2, ..., k).
CoverageCounts coverage_oracle(int k, int L);

// --- Independent variance estimator -----------------------------------------

struct OracleVariance {
  double spb = 0.0;  // E || grad f - g_spb ||^2
  double spb_se = 0.0;
  std::vector<double> p_hat;  // per-chunk single-sample variances
  std::vector<double> p_se;
  double harmonic_sum = 0.0;     // sum_i (k/(i*B)) * p_hat_i
  double harmonic_sum_se = 0.0;  // from independent per-chunk streams
};

// Monte-Carlo estimate of the SPB gradient noise with its own estimator
// composition (per-chunk means over contributing workers, no reuse of the
// aggregation code), following the shared sampling protocol so that at k=1 it
// reproduces spb::empirical_variance exactly.
OracleVariance variance_oracle(const spb::LayeredModel& model, const spb::SpbConfig& cfg,
                               const spb::Params& x, int trials, std::uint64_t seed);

}  // namespace jigsaw::oracle
