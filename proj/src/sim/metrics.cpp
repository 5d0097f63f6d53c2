#include "jigsaw/sim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "jigsaw/errors.hpp"

namespace jigsaw::sim {

namespace {

std::vector<std::pair<double, double>> cdf_of(std::vector<double> values) {
  std::vector<std::pair<double, double>> cdf;
  if (values.empty()) return cdf;
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  cdf.reserve(n);
  for (size_t i = 0; i < n; ++i)
    cdf.emplace_back(values[i], static_cast<double>(i + 1) / static_cast<double>(n));
  return cdf;
}

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

std::vector<std::pair<double, double>> jct_cdf(const MetricsReport& report) {
  std::vector<double> v;
  for (const auto& j : report.jobs)
    if (!j.failed) v.push_back(static_cast<double>(j.jct));
  return cdf_of(std::move(v));
}

std::vector<std::pair<double, double>> migration_cdf(const MetricsReport& report) {
  std::vector<double> v;
  for (const auto& j : report.jobs)
    if (!j.failed) v.push_back(j.migration_fraction);
  return cdf_of(std::move(v));
}

double quantile_sorted(const std::vector<double>& sorted_values, double q) {
  if (sorted_values.empty()) throw ArgumentError("quantile of empty sample");
  if (q <= 0.0 || q > 1.0) throw ArgumentError("quantile q must be in (0,1]");
  size_t rank = static_cast<size_t>(std::ceil(q * sorted_values.size()));
  if (rank == 0) rank = 1;
  return sorted_values[rank - 1];
}

std::string summary_csv(std::span<const MetricsReport> reports) {
  std::ostringstream os;
  os << "policy,makespan_us,mean_jct_us,p50_jct_us,p95_jct_us\n";
  for (const auto& r : reports) {
    std::vector<double> jcts;
    double sum = 0.0;
    for (const auto& j : r.jobs)
      if (!j.failed) {
        jcts.push_back(static_cast<double>(j.jct));
        sum += static_cast<double>(j.jct);
      }
    std::sort(jcts.begin(), jcts.end());
    long long mean = jcts.empty() ? 0 : std::llround(sum / jcts.size());
    long long p50 = jcts.empty() ? 0 : std::llround(quantile_sorted(jcts, 0.50));
    long long p95 = jcts.empty() ? 0 : std::llround(quantile_sorted(jcts, 0.95));
    os << r.policy << "," << r.makespan << "," << mean << "," << p50 << "," << p95 << "\n";
  }
  return os.str();
}

std::string cdf_csv(const std::vector<std::pair<double, double>>& cdf,
                    const std::string& value_column) {
  std::ostringstream os;
  os << value_column << ",cum_fraction\n";
  for (const auto& [v, f] : cdf) os << format("%.6f", v) << "," << format("%.6f", f) << "\n";
  return os.str();
}

std::string util_csv(const MetricsReport& report, int num_machines, Micros bucket_us) {
  // Union occupancy of each machine, bucketed.
  std::vector<std::vector<std::pair<Micros, Micros>>> spans(num_machines);
  Micros horizon = 0;
  for (const auto& a : report.history) {
    spans[a.machine].emplace_back(a.start, a.end);
    horizon = std::max(horizon, a.end);
  }
  std::ostringstream os;
  os << "machine,time_us,busy_fraction\n";
  if (bucket_us <= 0) throw ArgumentError("util bucket must be positive");
  Micros buckets = (horizon + bucket_us - 1) / bucket_us;
  for (int m = 0; m < num_machines; ++m) {
    auto& sp = spans[m];
    std::sort(sp.begin(), sp.end());
    // Merge overlapping reservations (co-resident tasks).
    std::vector<std::pair<Micros, Micros>> merged;
    for (const auto& s : sp) {
      if (!merged.empty() && s.first <= merged.back().second)
        merged.back().second = std::max(merged.back().second, s.second);
      else
        merged.push_back(s);
    }
    size_t idx = 0;
    for (Micros b = 0; b < buckets; ++b) {
      Micros lo = b * bucket_us, hi = lo + bucket_us;
      Micros busy = 0;
      while (idx < merged.size() && merged[idx].second <= lo) ++idx;
      for (size_t i = idx; i < merged.size() && merged[i].first < hi; ++i)
        busy += std::min(hi, merged[i].second) - std::max(lo, merged[i].first);
      os << m << "," << lo << "," << format("%.6f", static_cast<double>(busy) / bucket_us)
         << "\n";
    }
  }
  return os.str();
}

std::string plan_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "job_id,worker_id,iteration,machine,start_ms,end_ms,migrated\n";
  for (const auto& a : report.history) {
    os << report.jobs[a.job].job_id << "," << a.worker << "," << a.iteration << "," << a.machine
       << "," << format("%.3f", static_cast<double>(a.start) / 1000.0) << ","
       << format("%.3f", static_cast<double>(a.end) / 1000.0) << "," << (a.migrated ? 1 : 0)
       << "\n";
  }
  return os.str();
}

}  // namespace jigsaw::sim
