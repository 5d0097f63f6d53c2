#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace jigsaw::cost {

// One task's resource demands: a single worker running a single iteration.
struct TaskDemand {
  double duration_ms = 0.0;
  double peak_mem_gb = 0.0;
  double compute_fraction = 1.0;  // fraction of the GPU needed to run without slowdown
  double comm_mb = 0.0;           // gradient bytes sent to the parameter server

  std::int64_t duration_us() const;
};

// Profiling data for one model: per-fraction backward time and peak memory,
// measured at the knots listed in the profile file. Fractions are strictly
// increasing; times and memory are nondecreasing in the fraction.
struct ProfileEntry {
  struct Knot {
    double fraction;  // share of layers backpropagated, in (0, 1]
    double forward_ms;
    double backward_ms;
    double peak_mem_gb;
  };

  std::string model_name;
  std::vector<Knot> knots;
  double grad_size_mb = 0.0;
  int batch_size = 0;
  double compute_fraction = 1.0;

  void validate() const;  // throws ConfigError on a malformed profile
};

// Piecewise-linear interpolation over the profile knots; exact at every knot.
// Below the smallest knot the backward time falls linearly to (0, 0), the
// peak memory floors at the smallest profiled value (forward activations are
// still held), and the forward time is taken from the smallest knot.
double forward_time(const ProfileEntry& entry, double fraction);
double backward_time(const ProfileEntry& entry, double fraction);
double peak_memory(const ProfileEntry& entry, double fraction);

// Demand of a worker that backpropagates `fraction` of the layers.
// comm_ms_per_mb folds the parameter-server transfer into the duration.
TaskDemand task_demand(const ProfileEntry& entry, double fraction, double comm_ms_per_mb = 0.0);
// Worker j of k under the suffix rule (fraction j/k).
TaskDemand task_demand(const ProfileEntry& entry, int j, int k, double comm_ms_per_mb = 0.0);

// Derives a profile for an unprofiled model by scaling a measured one:
// durations scale with the gradient-size ratio, memory with the same ratio
// on top of the base floor. Used to extend the profile file explicitly,
// never applied implicitly at load time.
ProfileEntry scaled_profile(const ProfileEntry& base, const std::string& name,
                            double grad_size_mb);

// The profile table, loaded from a CSV with header
//   model,fraction,forward_ms,backward_ms,peak_mem_gb,grad_size_mb,batch
// (one row per knot). Immutable after load.
class ProfileTable {
 public:
  static ProfileTable load(const std::string& path);
  static ProfileTable from_csv(const std::string& csv_text, const std::string& origin = "<memory>");

  const ProfileEntry& get(const std::string& model) const;  // ConfigError when unknown
  bool contains(const std::string& model) const;
  std::vector<std::string> model_names() const;  // sorted
  void add(ProfileEntry entry);

 private:
  std::map<std::string, ProfileEntry> entries_;
};

}  // namespace jigsaw::cost
