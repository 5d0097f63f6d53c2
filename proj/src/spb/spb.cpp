#include "jigsaw/spb/spb.hpp"

#include <cmath>
#include <numeric>

#include "jigsaw/errors.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw::spb {

void SpbConfig::validate() const {
  if (k < 1) throw ArgumentError("SpbConfig: k must be >= 1");
  if (B < 1 || B % k != 0) throw ArgumentError("SpbConfig: B must be positive and divisible by k");
}

int suffix_layers(int j, int k, int L) {
  if (k < 1 || L < 1) throw ArgumentError("suffix_layers: k and L must be >= 1");
  if (j < 1 || j > k) throw ArgumentError("suffix_layers: worker index out of range");
  // ceil(j*L/k) in integers.
  return static_cast<int>((static_cast<long long>(j) * L + k - 1) / k);
}

std::vector<int> chunk_coverage(int m, int k) {
  if (k < 1) throw ArgumentError("chunk_coverage: k must be >= 1");
  if (m < 1 || m > k) throw ArgumentError("chunk_coverage: chunk index out of range");
  std::vector<int> workers(m);
  std::iota(workers.begin(), workers.end(), k - m + 1);
  return workers;
}

std::vector<std::pair<int, int>> chunk_layout(int k, int L) {
  if (k < 1 || L < 1) throw ArgumentError("chunk_layout: k and L must be >= 1");
  // Chunk m ends where the suffix of worker k-m begins; chunk k ends at L.
  std::vector<std::pair<int, int>> spans(k);
  for (int m = 1; m <= k; ++m) {
    int first = L - suffix_layers(k - m + 1, k, L) + 1;
    int last = (m == k) ? L : L - suffix_layers(k - m, k, L);
    spans[m - 1] = {first, last};
  }
  return spans;
}

std::vector<int> layer_chunks(int k, int L) {
  auto spans = chunk_layout(k, L);
  std::vector<int> chunk_of(L, 0);
  for (int m = 1; m <= k; ++m)
    for (int l = spans[m - 1].first; l <= spans[m - 1].second; ++l) chunk_of[l - 1] = m;
  return chunk_of;
}

PartialGradient partial_backprop(const LayeredModel& model, const Params& x,
                                 std::span<const int> batch, int suffix, BackpropStats* stats) {
  int L = model.layer_count();
  if (suffix < 1 || suffix > L) throw ArgumentError("partial_backprop: suffix out of range");
  if (batch.empty()) throw ArgumentError("partial_backprop: empty batch");

  PartialGradient g;
  g.covered_from = L - suffix + 1;
  g.blocks.resize(L);
  for (int l = g.covered_from; l <= L; ++l) g.blocks[l - 1].assign(model.block_dims()[l - 1], 0.0);
  if (stats && stats->layer_ops.empty()) stats->layer_ops.assign(L, 0);

  for (int s : batch) model.add_sample_gradient(x, s, suffix, g.blocks, stats);
  double inv = 1.0 / static_cast<double>(batch.size());
  for (int l = g.covered_from; l <= L; ++l)
    for (double& v : g.blocks[l - 1]) v *= inv;
  return g;
}

Params aggregate(const std::vector<PartialGradient>& grads, int k) {
  if (k < 1 || static_cast<int>(grads.size()) != k)
    throw ArgumentError("aggregate: need exactly k gradients");
  int L = static_cast<int>(grads[0].blocks.size());
  for (int j = 1; j <= k; ++j) {
    const auto& g = grads[j - 1];
    if (static_cast<int>(g.blocks.size()) != L)
      throw ProtocolError("aggregate: gradient layer counts differ");
    int expect_from = L - suffix_layers(j, k, L) + 1;
    if (g.covered_from != expect_from)
      throw ProtocolError("aggregate: worker " + std::to_string(j) +
                          " coverage does not match the suffix rule");
    for (int l = 1; l <= L; ++l) {
      bool present = !g.blocks[l - 1].empty();
      if (present != g.covers(l))
        throw ProtocolError("aggregate: block presence inconsistent with covered_from");
    }
  }

  auto chunk_of = layer_chunks(k, L);
  Params out(L);
  for (int l = 1; l <= L; ++l) {
    int m = chunk_of[l - 1];
    auto workers = chunk_coverage(m, k);
    size_t dim = grads[workers.front() - 1].blocks[l - 1].size();
    auto& dst = out[l - 1];
    dst.assign(dim, 0.0);
    for (int w : workers) {
      const auto& src = grads[w - 1].blocks[l - 1];
      if (src.size() != dim) throw ProtocolError("aggregate: block dimension mismatch");
      for (size_t c = 0; c < dim; ++c) dst[c] += src[c];
    }
    double inv = 1.0 / static_cast<double>(workers.size());
    for (double& v : dst) v *= inv;
  }
  return out;
}

// ---------------------------------------------------------------------------

double block_distance_sq(const Params& a, const Params& b) {
  double acc = 0.0;
  for (size_t l = 0; l < a.size(); ++l)
    for (size_t c = 0; c < a[l].size(); ++c) {
      double d = a[l][c] - b[l][c];
      acc += d * d;
    }
  return acc;
}

void axpy(Params& y, double alpha, const Params& x) {
  for (size_t l = 0; l < y.size(); ++l)
    for (size_t c = 0; c < y[l].size(); ++c) y[l][c] += alpha * x[l][c];
}

namespace {

std::vector<int> draw_batch(Rng rng, int count, int dataset_size) {
  std::vector<int> batch(count);
  for (int& s : batch) s = static_cast<int>(rng.next_below(dataset_size));
  return batch;
}

// One SPB gradient estimate: every worker draws B/k samples from its stream
// and backpropagates its suffix; the result is the weighted aggregate.
Params spb_estimate(const LayeredModel& model, const SpbConfig& cfg, const Params& x,
                    const Rng& stream_root) {
  int L = model.layer_count();
  int per_worker = cfg.B / cfg.k;
  std::vector<PartialGradient> grads(cfg.k);
  for (int j = 1; j <= cfg.k; ++j) {
    auto batch = draw_batch(stream_root.split(j), per_worker, model.dataset_size());
    grads[j - 1] = partial_backprop(model, x, batch, suffix_layers(j, cfg.k, L));
  }
  return aggregate(grads, cfg.k);
}

// Baseline estimate with the same worker streams: every worker computes the
// full gradient and the server takes the plain mean.
Params baseline_estimate(const LayeredModel& model, const SpbConfig& cfg, const Params& x,
                         const Rng& stream_root) {
  int L = model.layer_count();
  int per_worker = cfg.B / cfg.k;
  Params mean = model.zeros_like();
  for (int j = 1; j <= cfg.k; ++j) {
    auto batch = draw_batch(stream_root.split(j), per_worker, model.dataset_size());
    auto g = partial_backprop(model, x, batch, L);
    axpy(mean, 1.0 / cfg.k, g.blocks);
  }
  return mean;
}

}  // namespace

SgdResult spb_sgd_run(const LayeredModel& model, const SpbConfig& cfg, int iterations,
                      StepSchedule schedule, std::uint64_t seed, bool record_iterates) {
  cfg.validate();
  if (iterations < 1) throw ArgumentError("spb_sgd_run: iterations must be >= 1");
  double beta = 0.0;
  if (schedule == StepSchedule::Theorem1) {
    if (model.kind() != ModelKind::ConvexQuadratic)
      throw ConfigError("Theorem1 schedule requires the convex model");
    if (cfg.R <= 0.0 || cfg.V <= 0.0) throw ConfigError("Theorem1 schedule requires R, V > 0");
    beta = *model.beta();
  }

  Rng root(seed);
  Params x = model.initial_params();
  Params xbar = model.zeros_like();
  auto f_star = model.optimum_value();

  SgdResult res;
  res.avg_loss.reserve(iterations);
  res.step_size.reserve(iterations);
  if (f_star) res.avg_subopt.reserve(iterations);

  for (int s = 1; s <= iterations; ++s) {
    Params g = spb_estimate(model, cfg, x, root.split(s));

    double gamma;
    if (schedule == StepSchedule::Theorem1) {
      double eta = (cfg.R / cfg.V) * std::sqrt(2.0 / static_cast<double>(s));
      gamma = 1.0 / (beta + 1.0 / eta);
    } else {
      gamma = cfg.lr_base;
    }
    axpy(x, -gamma, g);

    // Running average of the post-update iterates x_2 .. x_{t+1}.
    for (size_t l = 0; l < x.size(); ++l)
      for (size_t c = 0; c < x[l].size(); ++c) xbar[l][c] += (x[l][c] - xbar[l][c]) / s;

    double fl = model.loss(xbar);
    res.avg_loss.push_back(fl);
    res.step_size.push_back(gamma);
    if (f_star) res.avg_subopt.push_back(fl - *f_star);
    if (record_iterates) res.iterates.push_back(x);
  }
  res.avg_iterate = std::move(xbar);
  return res;
}

VarianceEstimate empirical_variance(const LayeredModel& model, const SpbConfig& cfg,
                                    const Params& x, int trials, std::uint64_t seed) {
  cfg.validate();
  if (trials < 1) throw ArgumentError("empirical_variance: trials must be >= 1");
  Params grad = full_gradient(model, x);
  Rng root(seed);
  Rng worker_draws = root.split(kWorkerDrawTag);

  VarianceEstimate est;
  double spb_sum = 0.0, spb_sumsq = 0.0, base_sum = 0.0, base_sumsq = 0.0;
  for (int r = 1; r <= trials; ++r) {
    Rng stream = worker_draws.split(r);
    double d_spb = block_distance_sq(grad, spb_estimate(model, cfg, x, stream));
    double d_base = block_distance_sq(grad, baseline_estimate(model, cfg, x, stream));
    spb_sum += d_spb;
    spb_sumsq += d_spb * d_spb;
    base_sum += d_base;
    base_sumsq += d_base * d_base;
  }
  auto finish = [trials](double sum, double sumsq, double& mean, double& se) {
    mean = sum / trials;
    double var = std::max(0.0, sumsq / trials - mean * mean);
    se = std::sqrt(var / trials);
  };
  finish(spb_sum, spb_sumsq, est.spb, est.spb_se);
  finish(base_sum, base_sumsq, est.baseline, est.baseline_se);

  // Per-chunk p_i: squared deviation of a single-sample gradient, restricted
  // to the chunk's layers.
  int L = model.layer_count();
  auto spans = chunk_layout(cfg.k, L);
  Rng chunk_draws = root.split(kChunkDrawTag);
  est.p_hat.assign(cfg.k, 0.0);
  est.p_se.assign(cfg.k, 0.0);
  for (int m = 1; m <= cfg.k; ++m) {
    Rng stream = chunk_draws.split(m);
    double sum = 0.0, sumsq = 0.0;
    for (int r = 1; r <= trials; ++r) {
      int sample = static_cast<int>(stream.next_below(model.dataset_size()));
      Params g = model.zeros_like();
      model.add_sample_gradient(x, sample, L, g);
      double d = 0.0;
      for (int l = spans[m - 1].first; l <= spans[m - 1].second; ++l)
        for (size_t c = 0; c < g[l - 1].size(); ++c) {
          double diff = grad[l - 1][c] - g[l - 1][c];
          d += diff * diff;
        }
      sum += d;
      sumsq += d * d;
    }
    finish(sum, sumsq, est.p_hat[m - 1], est.p_se[m - 1]);
  }
  return est;
}

Params full_gradient(const LayeredModel& model, const Params& x) {
  std::vector<int> all(model.dataset_size());
  std::iota(all.begin(), all.end(), 0);
  return partial_backprop(model, x, all, model.layer_count()).blocks;
}

std::vector<double> exact_chunk_variances(const LayeredModel& model, const Params& x, int k) {
  int L = model.layer_count();
  int N = model.dataset_size();
  Params grad = full_gradient(model, x);
  auto spans = chunk_layout(k, L);
  std::vector<double> p(k, 0.0);
  Params g = model.zeros_like();
  for (int s = 0; s < N; ++s) {
    for (auto& blk : g)
      for (double& v : blk) v = 0.0;
    model.add_sample_gradient(x, s, L, g);
    for (int m = 1; m <= k; ++m) {
      double d = 0.0;
      for (int l = spans[m - 1].first; l <= spans[m - 1].second; ++l)
        for (size_t c = 0; c < g[l - 1].size(); ++c) {
          double diff = grad[l - 1][c] - g[l - 1][c];
          d += diff * diff;
        }
      p[m - 1] += d;
    }
  }
  for (double& v : p) v /= N;
  return p;
}

double exact_spb_variance(const LayeredModel& model, const SpbConfig& cfg, const Params& x) {
  auto p = exact_chunk_variances(model, x, cfg.k);
  double total = 0.0;
  for (int m = 1; m <= cfg.k; ++m)
    total += static_cast<double>(cfg.k) / (static_cast<double>(m) * cfg.B) * p[m - 1];
  return total;
}

double measured_grad_norm_bound(const LayeredModel& model, const Params& x) {
  int N = model.dataset_size();
  int L = model.layer_count();
  double worst = 0.0;
  Params g = model.zeros_like();
  for (int s = 0; s < N; ++s) {
    for (auto& blk : g)
      for (double& v : blk) v = 0.0;
    model.add_sample_gradient(x, s, L, g);
    double norm_sq = 0.0;
    for (const auto& blk : g)
      for (double v : blk) norm_sq += v * v;
    worst = std::max(worst, norm_sq);
  }
  return std::sqrt(worst);
}

}  // namespace jigsaw::spb
