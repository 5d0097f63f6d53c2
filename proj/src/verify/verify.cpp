#include "jigsaw/verify/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "jigsaw/errors.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw::verify {

using spb::Params;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::vector<int> draw_batch(Rng rng, int count, int dataset_size) {
  std::vector<int> batch(count);
  for (int& s : batch) s = static_cast<int>(rng.next_below(dataset_size));
  return batch;
}

// One SPB gradient estimate through the public surface.
Params one_spb_estimate(const spb::LayeredModel& model, const spb::SpbConfig& cfg,
                        const Params& x, const Rng& stream) {
  int L = model.layer_count();
  std::vector<spb::PartialGradient> grads(cfg.k);
  for (int j = 1; j <= cfg.k; ++j) {
    auto batch = draw_batch(stream.split(j), cfg.B / cfg.k, model.dataset_size());
    grads[j - 1] = spb::partial_backprop(model, x, batch, spb::suffix_layers(j, cfg.k, L));
  }
  return spb::aggregate(grads, cfg.k);
}

bool bitwise_equal(const Params& a, const Params& b) {
  if (a.size() != b.size()) return false;
  for (size_t l = 0; l < a.size(); ++l) {
    if (a[l].size() != b[l].size()) return false;
    if (!a[l].empty() &&
        std::memcmp(a[l].data(), b[l].data(), a[l].size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

constexpr double kEvalRadius = 1.0;

Params offset_point(const spb::BlockQuadratic& model, std::uint64_t seed, double radius) {
  Rng rng = Rng(seed).split(0x0FF5E7);
  Params x = model.optimum();
  std::vector<double> dir;
  for (const auto& blk : x)
    for (size_t c = 0; c < blk.size(); ++c) dir.push_back(rng.next_gaussian());
  double norm = 0.0;
  for (double v : dir) norm += v * v;
  norm = std::sqrt(norm);
  size_t i = 0;
  for (auto& blk : x)
    for (double& v : blk) v += radius * dir[i++] / norm;
  return x;
}

}  // namespace

QuadraticFixture make_fixture(std::uint64_t seed) {
  QuadraticFixture f;
  f.model = spb::make_random_quadratic(/*blocks=*/8, /*block_dim=*/2, /*samples=*/256,
                                       /*target_noise=*/0.05, seed);
  f.x_eval = offset_point(*f.model, seed, kEvalRadius);
  return f;
}

VarianceCheck run_variance_check(int k, int B, int trials, std::uint64_t seed) {
  auto fixture = make_fixture(seed);
  VarianceCheck chk;
  chk.k = k;
  chk.B = B;
  spb::SpbConfig cfg;
  cfg.k = k;
  cfg.B = B;
  chk.P = spb::measured_grad_norm_bound(*fixture.model, fixture.x_eval);
  chk.est = spb::empirical_variance(*fixture.model, cfg, fixture.x_eval, trials, seed);
  chk.oracle_est = oracle::variance_oracle(*fixture.model, cfg, fixture.x_eval, trials, seed);
  chk.lemma1_bound = 2.0 * chk.P * chk.P * k / B;
  chk.theorem2_bound = k >= 2 ? chk.lemma1_bound * std::log2(static_cast<double>(k)) : 0.0;
  return chk;
}

bool ConvergenceCheck::premises_ok() const {
  return max_dist_to_opt <= R / 2.0 + 1e-9 && max_traj_variance <= V * V + 1e-9;
}

ConvergenceCheck run_convergence_check(int k, int iterations, std::uint64_t seed) {
  auto fixture = make_fixture(seed);
  auto& model = *fixture.model;
  model.set_initial_params(fixture.x_eval);

  ConvergenceCheck chk;
  chk.k = k;
  chk.iterations = iterations;
  chk.beta = *model.beta();
  chk.R = 2.0 * std::sqrt(spb::block_distance_sq(fixture.x_eval, model.optimum()));

  spb::SpbConfig cfg;
  cfg.k = k;
  cfg.B = 64;
  // Noise bound over the ball the run should stay in: the exact noise at the
  // start point, the optimum, and boundary probes, with headroom. The run is
  // checked against V^2 afterwards, so an insufficient bound is caught.
  double worst = 0.0;
  for (int probe = 0; probe < 10; ++probe) {
    Params p = probe == 0   ? fixture.x_eval
               : probe == 1 ? model.optimum()
                            : offset_point(model, seed + 101 * probe, chk.R / 2.0);
    worst = std::max(worst, spb::exact_spb_variance(model, cfg, p));
  }
  chk.V = std::sqrt(1.25 * worst);
  cfg.R = chk.R;
  cfg.V = chk.V;

  auto res = spb::spb_sgd_run(model, cfg, iterations, spb::StepSchedule::Theorem1, seed,
                              /*record_iterates=*/true);
  chk.realized_subopt = res.avg_subopt.back();
  chk.avg_subopt = res.avg_subopt;
  chk.bound = chk.R * std::sqrt(2.0 * chk.V * chk.V / iterations) +
              chk.beta * chk.R * chk.R / iterations;
  for (const auto& x : res.iterates) {
    chk.max_dist_to_opt =
        std::max(chk.max_dist_to_opt, std::sqrt(spb::block_distance_sq(x, model.optimum())));
    chk.max_traj_variance = std::max(chk.max_traj_variance, spb::exact_spb_variance(model, cfg, x));
  }
  return chk;
}

int iterations_to_target(const ConvergenceCheck& check, double target) {
  for (size_t s = 0; s < check.avg_subopt.size(); ++s)
    if (check.avg_subopt[s] <= target) return static_cast<int>(s + 1);
  return check.iterations + 1;
}

namespace {

CheckResult check_suffix_rule() {
  CheckResult r{"suffix-rule", true, ""};
  try {
    struct Case { int j, k, L, expect; };
    for (auto c : {Case{3, 3, 9, 9}, Case{1, 3, 9, 3}, Case{2, 3, 9, 6}, Case{1, 4, 10, 3}}) {
      if (spb::suffix_layers(c.j, c.k, c.L) != c.expect) {
        r.pass = false;
        r.detail = "example failed";
        return r;
      }
    }
    for (int k = 1; k <= 24 && r.pass; ++k)
      for (int L = 1; L <= 24 && r.pass; ++L) {
        int prev = 0;
        for (int j = 1; j <= k; ++j) {
          int s = spb::suffix_layers(j, k, L);
          if (s < prev || s < 1 || s > L) r.pass = false;
          prev = s;
        }
        if (spb::suffix_layers(k, k, L) != L) r.pass = false;
      }
    if (!r.pass) r.detail = "monotonicity or full-worker coverage failed";
    try {
      spb::suffix_layers(0, 3, 9);
      r.pass = false;
      r.detail = "out-of-range worker accepted";
    } catch (const ArgumentError&) {
    }
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = e.what();
  }
  return r;
}

CheckResult check_chunk_coverage() {
  CheckResult r{"chunk-coverage", true, ""};
  for (int k = 1; k <= 16 && r.pass; ++k) {
    for (int L : {k, 2 * k, 3 * k + 1, 2 * k - 1}) {
      if (L < 1 || L > 64) continue;
      auto counts = oracle::coverage_oracle(k, L);
      auto spans = spb::chunk_layout(k, L);
      for (int m = 1; m <= k; ++m) {
        auto workers = spb::chunk_coverage(m, k);
        if (static_cast<int>(workers.size()) != m) r.pass = false;
        for (int l = spans[m - 1].first; l <= spans[m - 1].second; ++l)
          if (counts.per_layer[l - 1] != m) r.pass = false;
      }
      // The union of chunks a worker contributes to must be its suffix.
      for (int j = 1; j <= k; ++j) {
        int suffix = spb::suffix_layers(j, k, L);
        int covered = 0;
        for (int m = 1; m <= k; ++m) {
          auto workers = spb::chunk_coverage(m, k);
          bool in = std::find(workers.begin(), workers.end(), j) != workers.end();
          if (in && spans[m - 1].second >= spans[m - 1].first)
            covered += spans[m - 1].second - spans[m - 1].first + 1;
        }
        if (covered != suffix) r.pass = false;
      }
    }
  }
  if (!r.pass) r.detail = "coverage law violated";
  return r;
}

CheckResult check_gradient_fd(std::uint64_t seed) {
  CheckResult r{"gradient-finite-difference", true, ""};
  auto model = spb::make_random_chain_mlp({3, 5, 4, 1}, 32, seed);
  Params x = model->initial_params();
  std::vector<int> batch(16);
  std::iota(batch.begin(), batch.end(), 0);
  auto grad = spb::partial_backprop(*model, x, batch, model->layer_count()).blocks;

  auto batch_loss = [&](const Params& p) {
    double total = 0.0;
    for (int s : batch) total += model->sample_loss(p, s);
    return total / batch.size();
  };
  const double h = 1e-5;
  double worst_rel = 0.0;
  for (size_t l = 0; l < x.size(); ++l) {
    double err_sq = 0.0, ref_sq = 0.0;
    for (size_t c = 0; c < x[l].size(); ++c) {
      Params plus = x, minus = x;
      plus[l][c] += h;
      minus[l][c] -= h;
      double fd = (batch_loss(plus) - batch_loss(minus)) / (2.0 * h);
      double d = grad[l][c] - fd;
      err_sq += d * d;
      ref_sq += fd * fd;
    }
    worst_rel = std::max(worst_rel, std::sqrt(err_sq) / std::max(std::sqrt(ref_sq), 1e-12));
  }
  r.pass = worst_rel < 1e-5;
  r.detail = "max block relative error " + fmt(worst_rel);
  return r;
}

CheckResult check_partial_backprop(std::uint64_t seed) {
  CheckResult r{"partial-backprop-suffix", true, ""};
  auto model = spb::make_random_chain_mlp({3, 4, 4, 4, 1}, 32, seed);
  Params x = model->initial_params();
  std::vector<int> batch(8);
  std::iota(batch.begin(), batch.end(), 0);
  int L = model->layer_count();
  auto full = spb::partial_backprop(*model, x, batch, L);
  for (int suffix = 1; suffix <= L && r.pass; ++suffix) {
    spb::BackpropStats stats;
    auto part = spb::partial_backprop(*model, x, batch, suffix, &stats);
    if (part.covered_from != L - suffix + 1) r.pass = false;
    for (int l = 1; l <= L; ++l) {
      bool covered = l >= part.covered_from;
      if (covered != !part.blocks[l - 1].empty()) r.pass = false;
      if (covered && (part.blocks[l - 1] != full.blocks[l - 1])) r.pass = false;
      if (!covered && stats.layer_ops[l - 1] != 0) r.pass = false;
      if (covered && stats.layer_ops[l - 1] == 0) r.pass = false;
    }
  }
  if (!r.pass) r.detail = "suffix blocks differ from the full pass or prefix work is nonzero";
  return r;
}

CheckResult check_k1_degeneracy(std::uint64_t seed) {
  CheckResult r{"k1-degeneracy", true, ""};
  auto fixture = make_fixture(seed);
  auto& model = *fixture.model;
  model.set_initial_params(fixture.x_eval);
  spb::SpbConfig cfg;
  cfg.k = 1;
  cfg.B = 16;
  cfg.lr_base = 1e-4;
  const int iters = 50;
  auto res = spb::spb_sgd_run(model, cfg, iters, spb::StepSchedule::Constant, seed, true);

  // Plain mini-batch SGD with the shared stream protocol.
  Params x = model.initial_params();
  Rng root(seed);
  for (int s = 1; s <= iters; ++s) {
    auto batch = draw_batch(root.split(s).split(1), cfg.B, model.dataset_size());
    auto g = spb::partial_backprop(model, x, batch, model.layer_count());
    spb::axpy(x, -cfg.lr_base, g.blocks);
    if (!bitwise_equal(x, res.iterates[s - 1])) {
      r.pass = false;
      r.detail = "diverged from plain SGD at iteration " + std::to_string(s);
      return r;
    }
  }
  r.detail = "bit-identical over " + std::to_string(iters) + " iterations";
  return r;
}

CheckResult check_aggregation_unbiased(const VerifyOptions& opts) {
  CheckResult r{"aggregation-unbiasedness", true, ""};
  auto fixture = make_fixture(opts.seed);
  spb::SpbConfig cfg;
  cfg.k = opts.k;
  cfg.B = opts.B;
  const Params grad = spb::full_gradient(*fixture.model, fixture.x_eval);
  int trials = std::max(opts.trials, 10000);

  Rng streams = Rng(opts.seed).split(0xAB1A5);
  std::vector<Params> estimates;
  estimates.reserve(trials);
  Params mean = fixture.model->zeros_like();
  for (int t = 1; t <= trials; ++t) {
    estimates.push_back(one_spb_estimate(*fixture.model, cfg, fixture.x_eval, streams.split(t)));
    spb::axpy(mean, 1.0, estimates.back());
  }
  for (auto& blk : mean)
    for (double& v : blk) v /= trials;

  double worst_ratio = 0.0;
  for (size_t l = 0; l < mean.size(); ++l) {
    double dist_sq = 0.0, spread_sq = 0.0;
    for (size_t c = 0; c < mean[l].size(); ++c) {
      double d = mean[l][c] - grad[l][c];
      dist_sq += d * d;
    }
    for (const auto& est : estimates)
      for (size_t c = 0; c < mean[l].size(); ++c) {
        double d = est[l][c] - mean[l][c];
        spread_sq += d * d;
      }
    double se = std::sqrt(spread_sq / trials / (trials - 1));
    worst_ratio = std::max(worst_ratio, std::sqrt(dist_sq) / se);
  }
  r.pass = worst_ratio <= 3.0;
  r.detail = "worst block deviation " + fmt(worst_ratio) + " standard errors";
  return r;
}

}  // namespace

std::vector<CheckResult> run_verify_suite(const VerifyOptions& opts) {
  std::vector<CheckResult> results;
  results.push_back(check_suffix_rule());
  results.push_back(check_chunk_coverage());
  results.push_back(check_gradient_fd(opts.seed));
  results.push_back(check_partial_backprop(opts.seed));
  results.push_back(check_k1_degeneracy(opts.seed));
  results.push_back(check_aggregation_unbiased(opts));

  // Noise bounds and the harmonic identity at the configured (k, B).
  auto var = run_variance_check(opts.k, opts.B, opts.trials, opts.seed);
  {
    CheckResult r{"lemma1-baseline-bound", true, ""};
    r.pass = var.est.baseline <= var.lemma1_bound + 3.0 * var.est.baseline_se;
    r.detail = "measured " + fmt(var.est.baseline) + " vs bound " + fmt(var.lemma1_bound);
    results.push_back(r);
  }
  if (opts.k >= 2) {
    CheckResult r{"theorem2-spb-bound", true, ""};
    r.pass = var.est.spb <= var.theorem2_bound + 3.0 * var.est.spb_se;
    r.detail = "measured " + fmt(var.est.spb) + " vs bound " + fmt(var.theorem2_bound);
    results.push_back(r);
  }
  {
    CheckResult r{"variance-harmonic-identity", true, ""};
    double se = std::sqrt(var.est.spb_se * var.est.spb_se +
                          var.oracle_est.harmonic_sum_se * var.oracle_est.harmonic_sum_se);
    double gap = std::abs(var.est.spb - var.oracle_est.harmonic_sum);
    r.pass = gap <= 3.0 * se;
    r.detail = "spb " + fmt(var.est.spb) + " vs harmonic sum " + fmt(var.oracle_est.harmonic_sum) +
               " (" + fmt(se > 0 ? gap / se : 0.0) + " se)";
    results.push_back(r);
  }

  // Theorem 1 with the measured constants, plus the worker-scaling trend.
  {
    auto chk = run_convergence_check(std::max(opts.k, 2), opts.sgd_iterations, opts.seed);
    CheckResult r{"theorem1-convergence-bound", chk.bound_ok(), ""};
    r.detail = "subopt " + fmt(chk.realized_subopt) + " vs bound " + fmt(chk.bound) +
               (chk.premises_ok() ? "" : " (premises violated)");
    results.push_back(r);

    auto chk8 = run_convergence_check(8, opts.sgd_iterations, opts.seed);
    auto chk4 = run_convergence_check(4, opts.sgd_iterations, opts.seed);
    int probe = std::max(1, (opts.sgd_iterations * 3) / 4);
    double target = chk8.avg_subopt[probe - 1];
    int it4 = iterations_to_target(chk4, target);
    int it8 = iterations_to_target(chk8, target);
    CheckResult trend{"worker-scaling-iterations", it4 <= it8, ""};
    trend.detail = "iterations to target: k=4 " + std::to_string(it4) + ", k=8 " +
                   std::to_string(it8);
    results.push_back(trend);
  }
  return results;
}

}  // namespace jigsaw::verify
