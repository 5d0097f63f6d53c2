#include "jigsaw/trace/trace.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "jigsaw/csvio.hpp"
#include "jigsaw/errors.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw::trace {

namespace {
const std::set<int> kAllowedWorkerCounts = {1, 2, 4, 8, 16};
}

std::vector<TraceRecord> generate(std::uint64_t seed, const GenOptions& opts,
                                  const std::vector<std::string>& model_pool) {
  if (opts.n_jobs < 0) throw ArgumentError("generate: n_jobs must be >= 0");
  if (model_pool.empty()) throw ArgumentError("generate: empty model pool");
  if (opts.iterations_min < 1 || opts.iterations_max < opts.iterations_min)
    throw ArgumentError("generate: bad iterations range");
  double mix_sum = 0.0;
  for (const auto& [workers, p] : opts.worker_mix) {
    if (p < 0.0) throw ArgumentError("generate: negative mix probability");
    if (!kAllowedWorkerCounts.count(workers))
      throw ArgumentError("generate: worker count must be one of {1,2,4,8,16}");
    mix_sum += p;
  }
  if (std::abs(mix_sum - 1.0) > 1e-9) throw ArgumentError("generate: worker mix must sum to 1");

  Rng rng = Rng(seed).split(0x7ACE);
  std::vector<TraceRecord> records;
  records.reserve(opts.n_jobs);
  Micros arrival = 0;
  for (int i = 0; i < opts.n_jobs; ++i) {
    TraceRecord r;
    r.job_id = "j" + std::to_string(i + 1);
    if (i > 0)
      arrival += sched::seconds_to_us(rng.next_exponential(opts.mean_interarrival_s));
    r.arrival = arrival;
    double u = rng.next_unit();
    double acc = 0.0;
    r.num_workers = opts.worker_mix.back().first;
    for (const auto& [workers, p] : opts.worker_mix) {
      acc += p;
      if (u < acc) {
        r.num_workers = workers;
        break;
      }
    }
    r.model_name = model_pool[rng.next_below(model_pool.size())];
    r.iterations = static_cast<int>(rng.next_range(opts.iterations_min, opts.iterations_max));
    r.spb = opts.spb;
    records.push_back(std::move(r));
  }
  return records;
}

std::string to_csv(const std::vector<TraceRecord>& records) {
  std::ostringstream os;
  os << "job_id,arrival_s,model_name,num_workers,iterations,spb\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(r.arrival) / 1e6);
    os << r.job_id << "," << buf << "," << r.model_name << "," << r.num_workers << ","
       << r.iterations << "," << (r.spb ? 1 : 0) << "\n";
  }
  return os.str();
}

void save(const std::string& path, const std::vector<TraceRecord>& records) {
  csv::write_file_atomic(path, to_csv(records));
}

std::vector<TraceRecord> load_records(const std::string& path) {
  auto table = csv::read_file(path);
  const std::vector<std::string> expected = {"job_id", "arrival_s", "model_name",
                                             "num_workers", "iterations", "spb"};
  if (table.header != expected) throw ConfigError(path + ": unexpected trace header");
  std::vector<TraceRecord> records;
  records.reserve(table.rows.size());
  Micros prev_arrival = 0;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    std::string where = path + ":" + std::to_string(table.line_numbers[i]);
    if (row.size() != 6) throw ConfigError(where + ": expected 6 fields");
    TraceRecord r;
    try {
      r.job_id = row[0];
      r.arrival = sched::seconds_to_us(std::stod(row[1]));
      r.model_name = row[2];
      r.num_workers = std::stoi(row[3]);
      r.iterations = std::stoi(row[4]);
      if (row[5] != "0" && row[5] != "1") throw std::invalid_argument("spb");
      r.spb = row[5] == "1";
    } catch (const std::logic_error&) {
      throw ConfigError(where + ": malformed field");
    }
    if (r.job_id.empty()) throw ConfigError(where + ": empty job_id");
    if (!kAllowedWorkerCounts.count(r.num_workers))
      throw ConfigError(where + ": num_workers must be one of {1,2,4,8,16}");
    if (r.iterations < 1) throw ConfigError(where + ": iterations must be >= 1");
    if (r.arrival < prev_arrival) throw ConfigError(where + ": arrivals must be nondecreasing");
    prev_arrival = r.arrival;
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<JobDag> to_jobs(const std::vector<TraceRecord>& records,
                            const cost::ProfileTable& profiles) {
  std::vector<JobDag> jobs;
  jobs.reserve(records.size());
  for (const auto& r : records) {
    if (!profiles.contains(r.model_name))
      throw ConfigError("trace job " + r.job_id + ": unknown model " + r.model_name);
    JobDag dag;
    dag.job_id = r.job_id;
    dag.arrival = r.arrival;
    dag.model_name = r.model_name;
    dag.workers = r.num_workers;
    dag.total_iterations = r.iterations;
    dag.spb_enabled = r.spb;
    dag.fractions.resize(r.num_workers);
    for (int j = 1; j <= r.num_workers; ++j)
      dag.fractions[j - 1] = r.spb ? static_cast<double>(j) / r.num_workers : 1.0;
    jobs.push_back(std::move(dag));
  }
  return jobs;
}

std::vector<JobDag> load(const std::string& path, const cost::ProfileTable& profiles) {
  return to_jobs(load_records(path), profiles);
}

}  // namespace jigsaw::trace
