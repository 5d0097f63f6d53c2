#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "jigsaw/spb/model.hpp"

namespace jigsaw::spb {

// With k workers training an L-layer model, worker j backpropagates only the
// last ceil(j*L/k) layers; worker k always computes the full gradient. The L
// layers fall into k contiguous chunks (input-side numbering, derived from
// the suffix cut points) such that chunk m is computed by exactly the m
// workers {k-m+1..k}. The parameter server averages each chunk over its
// contributors, which keeps the aggregate unbiased.

struct SpbConfig {
  int k = 1;             // workers
  int B = 1;             // global batch size; divisible by k
  double P = 0.0;        // measured per-sample gradient-norm bound
  double lr_base = 0.0;  // step size for the constant schedule
  double R = 0.0;        // domain diameter bound
  double V = 0.0;        // gradient-noise bound used in the step schedule

  void validate() const;  // throws ArgumentError
};

struct PartialGradient {
  std::vector<std::vector<double>> blocks;  // size L; absent blocks are empty
  int covered_from = 1;                     // 1-based first valid layer; L+1 means empty

  bool covers(int layer_1based) const { return layer_1based >= covered_from; }
};

// Number of layers worker j (1-based) backpropagates: ceil(j*L/k).
int suffix_layers(int j, int k, int L);

// Workers contributing to input-side chunk m: {k-m+1, ..., k}.
std::vector<int> chunk_coverage(int m, int k);

// 1-based inclusive layer span [first,last] of each chunk; empty chunks have
// first > last (they occur when consecutive suffix lengths coincide).
std::vector<std::pair<int, int>> chunk_layout(int k, int L);

// Chunk index (1-based) containing each layer (1-based position in vector).
std::vector<int> layer_chunks(int k, int L);

// Mini-batch gradient of the last `suffix` layers: the mean over `batch` of
// per-sample gradients, accumulated in batch order. Covered blocks are
// bit-identical to the same blocks of a full reverse pass.
PartialGradient partial_backprop(const LayeredModel& model, const Params& x,
                                 std::span<const int> batch, int suffix,
                                 BackpropStats* stats = nullptr);

// Parameter-server aggregation: chunk m is the plain average of the m
// contributing workers' blocks. grads[j] must come from worker j+1 and match
// the suffix rule, otherwise a ProtocolError is thrown.
Params aggregate(const std::vector<PartialGradient>& grads, int k);

// --- SGD ------------------------------------------------------------------

enum class StepSchedule {
  Theorem1,  // 1 / (beta + 1/eta(s)), eta(s) = (R/V) * sqrt(2/s)
  Constant,  // lr_base
};

struct SgdResult {
  std::vector<double> avg_loss;    // f(xbar_s) for s = 1..t
  std::vector<double> step_size;   // gamma_s
  std::vector<double> avg_subopt;  // avg_loss - f(x*) when the optimum is known
  Params avg_iterate;              // xbar_t = mean of x_2..x_{t+1}
  std::vector<Params> iterates;    // x_{s+1}, kept only when record_iterates
};

// Runs t iterations of SPB-SGD from the model's initial parameters. Each
// iteration every worker draws B/k samples i.i.d. from the dataset (stream
// seed.split(s).split(j)), computes its suffix gradient, and the aggregate
// drives the update. The Theorem1 schedule requires a convex model.
SgdResult spb_sgd_run(const LayeredModel& model, const SpbConfig& cfg, int iterations,
                      StepSchedule schedule, std::uint64_t seed, bool record_iterates = false);

// --- Gradient noise --------------------------------------------------------

// Stream tags of the Monte-Carlo sampling protocol. The brute-force variance
// oracle implements the same protocol independently, so estimates can be
// compared trial-for-trial.
inline constexpr std::uint64_t kWorkerDrawTag = 0x5D17;  // .split(trial).split(worker)
inline constexpr std::uint64_t kChunkDrawTag = 0xC410;   // .split(chunk).split(trial)

struct VarianceEstimate {
  double spb = 0.0;       // E || grad f - g_spb ||^2
  double spb_se = 0.0;
  double baseline = 0.0;  // same, with every worker computing the full gradient
  double baseline_se = 0.0;
  std::vector<double> p_hat;  // per-chunk single-sample variances p_i
  std::vector<double> p_se;
};

// Monte-Carlo estimates at a fixed parameter point. SPB and baseline
// estimators share worker sample streams, so at k=1 they agree exactly.
VarianceEstimate empirical_variance(const LayeredModel& model, const SpbConfig& cfg,
                                    const Params& x, int trials, std::uint64_t seed);

// Exact gradient over the whole dataset.
Params full_gradient(const LayeredModel& model, const Params& x);

// Exact per-chunk single-sample variances p_i(x) by dataset enumeration.
std::vector<double> exact_chunk_variances(const LayeredModel& model, const Params& x, int k);

// Exact E||grad f - g_spb||^2 at x: sum_i (k/(i*B)) * p_i(x).
double exact_spb_variance(const LayeredModel& model, const SpbConfig& cfg, const Params& x);

// Max per-sample gradient norm over the dataset at x (the measured P).
double measured_grad_norm_bound(const LayeredModel& model, const Params& x);

// --- small vector helpers shared by spb and verify code --------------------

double block_distance_sq(const Params& a, const Params& b);
void axpy(Params& y, double alpha, const Params& x);  // y += alpha * x

}  // namespace jigsaw::spb
