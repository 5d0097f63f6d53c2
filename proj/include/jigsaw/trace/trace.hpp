#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jigsaw/cost/profile.hpp"
#include "jigsaw/sched/types.hpp"

namespace jigsaw::trace {

using sched::JobDag;
using sched::Micros;

// One row of a trace CSV:
//   job_id,arrival_s,model_name,num_workers,iterations,spb
struct TraceRecord {
  std::string job_id;
  Micros arrival = 0;
  std::string model_name;
  int num_workers = 1;
  int iterations = 1;
  bool spb = true;
};

struct GenOptions {
  int n_jobs = 500;
  double mean_interarrival_s = 30.0;
  // Worker-count mix; probabilities must sum to 1.
  std::vector<std::pair<int, double>> worker_mix = {
      {1, 0.50}, {2, 0.10}, {4, 0.20}, {8, 0.15}, {16, 0.05}};
  int iterations_min = 50;
  int iterations_max = 500;
  bool spb = true;
};

// Synthetic trace: exponential inter-arrivals, worker counts from the mix,
// models uniform over `model_pool`, iteration counts uniform over the range.
// Deterministic for a given seed.
std::vector<TraceRecord> generate(std::uint64_t seed, const GenOptions& opts,
                                  const std::vector<std::string>& model_pool);

std::string to_csv(const std::vector<TraceRecord>& records);
void save(const std::string& path, const std::vector<TraceRecord>& records);

// Parses a trace CSV; malformed rows raise ConfigError naming the line.
std::vector<TraceRecord> load_records(const std::string& path);

// Expands records into JobDags, filling per-worker fractions from the suffix
// rule when spb is set and checking models against the profile table.
std::vector<JobDag> to_jobs(const std::vector<TraceRecord>& records,
                            const cost::ProfileTable& profiles);

// load_records + to_jobs.
std::vector<JobDag> load(const std::string& path, const cost::ProfileTable& profiles);

}  // namespace jigsaw::trace
