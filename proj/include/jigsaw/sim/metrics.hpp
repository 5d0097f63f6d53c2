#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jigsaw/sim/sim.hpp"

namespace jigsaw::sim {

// Empirical CDF over completed jobs: (value, cumulative fraction), sorted
// and reaching 1.0. Empty when no job completed.
std::vector<std::pair<double, double>> jct_cdf(const MetricsReport& report);
std::vector<std::pair<double, double>> migration_cdf(const MetricsReport& report);

// Nearest-rank quantile of a sorted sample, q in (0, 1].
double quantile_sorted(const std::vector<double>& sorted_values, double q);

// CSV emitters. All numbers are printed with fixed formats so identical runs
// produce identical bytes.
std::string summary_csv(std::span<const MetricsReport> reports);
std::string cdf_csv(const std::vector<std::pair<double, double>>& cdf,
                    const std::string& value_column);
std::string util_csv(const MetricsReport& report, int num_machines, Micros bucket_us);
std::string plan_csv(const MetricsReport& report);

}  // namespace jigsaw::sim
