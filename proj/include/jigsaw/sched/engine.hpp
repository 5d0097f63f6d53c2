#pragma once

#include <optional>
#include <vector>

#include "jigsaw/sched/types.hpp"

namespace jigsaw::sched {

// Common driving surface of the scheduling policies. The simulation engine
// feeds arrivals and ticks in time order; a policy reports its next internal
// event (a completion it needs to react to) and the assignments it has
// committed. Committed assignments never change.
class PolicyEngine {
 public:
  virtual ~PolicyEngine() = default;

  virtual void add_job(const JobInstance& job) = 0;  // called at the job's arrival time
  virtual void on_tick(Micros now) = 0;              // scheduling pass
  virtual std::optional<Micros> next_event() const { return std::nullopt; }
  virtual void on_event(Micros now) { (void)now; }
  virtual bool idle() const = 0;  // no queued or running work left

  const std::vector<Assignment>& history() const { return history_; }
  const std::vector<int>& failed_jobs() const { return failed_jobs_; }

 protected:
  std::vector<Assignment> history_;
  std::vector<int> failed_jobs_;
};

}  // namespace jigsaw::sched
