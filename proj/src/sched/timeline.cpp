#include "jigsaw/sched/timeline.hpp"

#include "jigsaw/errors.hpp"

namespace jigsaw::sched {

namespace {
constexpr double kEps = 1e-9;
}

double priority(const TaskSpec& task, const QueueStats& stats, const SchedulerConfig& cfg) {
  if (stats.max_mem_gb <= 0.0 || stats.max_duration_ms <= 0.0 || stats.max_compute <= 0.0)
    throw std::logic_error("priority: empty queue stats");
  double p = (task.demand.peak_mem_gb / stats.max_mem_gb) *
             (task.demand.duration_ms / stats.max_duration_ms);
  if (cfg.priority_includes_compute) p *= task.demand.compute_fraction / stats.max_compute;
  return p;
}

bool MachineTimeline::fits(const Level& level, double mem_gb, double compute) const {
  if (level.mem + mem_gb > mem_cap_ + kEps) return false;
  if (level.compute + compute > 1.0 + kEps) return false;
  if (max_tasks_ > 0 && level.tasks + 1 > max_tasks_) return false;
  return true;
}

const MachineTimeline::Level& MachineTimeline::level_at(Micros t) const {
  static const Level kIdle{};
  auto it = steps_.upper_bound(t);
  if (it == steps_.begin()) return kIdle;
  return std::prev(it)->second;
}

double MachineTimeline::mem_in_use(Micros t) const { return level_at(t).mem; }
double MachineTimeline::compute_in_use(Micros t) const { return level_at(t).compute; }

std::optional<Micros> MachineTimeline::earliest_fit(Micros ready, Micros duration, double mem_gb,
                                                    double compute, Micros search_limit) const {
  if (duration <= 0) throw ArgumentError("earliest_fit: duration must be positive");
  if (mem_gb > mem_cap_ + kEps || compute > 1.0 + kEps) return std::nullopt;

  Micros t = ready;
  while (t < search_limit) {
    // Walk the usage segments covering [t, t + duration). `it` points at the
    // first breakpoint after the segment containing t.
    auto it = steps_.upper_bound(t);
    Level current = (it == steps_.begin()) ? Level{} : std::prev(it)->second;
    Micros needed_until = t + duration;
    bool retry = false;
    while (true) {
      Micros seg_end = (it == steps_.end()) ? kNever : it->first;
      if (!fits(current, mem_gb, compute)) {
        t = seg_end;  // usage only changes at breakpoints
        retry = true;
        break;
      }
      if (seg_end >= needed_until) return t;
      current = it->second;
      ++it;
    }
    if (retry && t >= kNever) return std::nullopt;  // cannot happen once the task fits alone
  }
  return std::nullopt;  // nothing before search_limit
}

void MachineTimeline::reserve(Micros start, Micros end, double mem_gb, double compute) {
  if (end <= start) throw ArgumentError("reserve: empty interval");
  auto ensure_key = [this](Micros at) {
    auto it = steps_.lower_bound(at);
    if (it != steps_.end() && it->first == at) return;
    Level before = (it == steps_.begin()) ? Level{} : std::prev(it)->second;
    steps_.emplace_hint(it, at, before);
  };
  ensure_key(start);
  ensure_key(end);
  for (auto it = steps_.find(start); it != steps_.end() && it->first < end; ++it) {
    it->second.mem += mem_gb;
    it->second.compute += compute;
    it->second.tasks += 1;
  }
}

std::optional<StartOption> earliest_start(const TaskSpec& task, const MachineTimeline& machine,
                                          const SchedulerConfig& cfg, double grad_size_mb,
                                          Micros search_limit) {
  Micros duration = task.demand.duration_us();
  bool migrates = task.prev_machine.has_value() && *task.prev_machine != machine.id();
  if (migrates) duration += cfg.surcharge_us(grad_size_mb);
  auto start = machine.earliest_fit(task.ready_time, duration, task.demand.peak_mem_gb,
                                    task.demand.compute_fraction, search_limit);
  if (!start) return std::nullopt;
  return StartOption{*start, duration};
}

}  // namespace jigsaw::sched
