#pragma once

#include <string>
#include <vector>

#include "jigsaw/sched/types.hpp"

namespace jigsaw::sched {

// Independent invariant checker over an executed plan. Verifies that
//  (a) no machine is oversubscribed (memory or compute) at any event point,
//  (b) iteration i+1 of a job starts only after iteration i has fully ended,
//  (c) every worker runs every iteration exactly once (failed jobs none),
//  (d) the migration surcharge is applied exactly when a worker's machine
//      differs from its previous iteration's machine.
// Returns human-readable violations; an empty result means the plan is valid.
// Never throws on plan defects.
std::vector<std::string> validate_schedule(const std::vector<Assignment>& plan,
                                           int num_machines, double mem_per_machine_gb,
                                           const std::vector<JobInstance>& jobs,
                                           const SchedulerConfig& cfg,
                                           const std::vector<int>& failed_jobs = {});

}  // namespace jigsaw::sched
