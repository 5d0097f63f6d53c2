#include <cstring>
#include <numeric>

#include "doctest.h"
#include "jigsaw/errors.hpp"
#include "jigsaw/rng.hpp"
#include "jigsaw/spb/spb.hpp"

using namespace jigsaw;
using namespace jigsaw::spb;

namespace {

std::vector<int> whole_dataset(const LayeredModel& m) {
  std::vector<int> all(m.dataset_size());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

TEST_CASE("rng streams are deterministic and splittable") {
  Rng a(42), b(42);
  CHECK(a.next_u64() == b.next_u64());
  Rng c = Rng(42).split(1);
  Rng d = Rng(42).split(2);
  CHECK(c.next_u64() != d.next_u64());
  Rng e(7);
  for (int i = 0; i < 1000; ++i) {
    auto v = e.next_below(13);
    CHECK(v < 13);
    double u = e.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("suffix rule") {
  CHECK(suffix_layers(3, 3, 9) == 9);
  CHECK(suffix_layers(1, 3, 9) == 3);
  CHECK(suffix_layers(2, 3, 9) == 6);
  CHECK(suffix_layers(1, 4, 10) == 3);  // ceil(2.5)
  for (int k = 1; k <= 12; ++k)
    for (int L = 1; L <= 20; ++L) {
      CHECK(suffix_layers(k, k, L) == L);
      for (int j = 2; j <= k; ++j)
        CHECK(suffix_layers(j, k, L) >= suffix_layers(j - 1, k, L));
    }
  CHECK_THROWS_AS(suffix_layers(0, 3, 9), ArgumentError);
  CHECK_THROWS_AS(suffix_layers(4, 3, 9), ArgumentError);
}

TEST_CASE("chunk coverage sets") {
  CHECK(chunk_coverage(1, 4) == std::vector<int>{4});
  CHECK(chunk_coverage(4, 4) == std::vector<int>{1, 2, 3, 4});
  CHECK(chunk_coverage(2, 3) == std::vector<int>{2, 3});
  for (int k = 1; k <= 16; ++k)
    for (int m = 1; m <= k; ++m)
      CHECK(chunk_coverage(m, k).size() == static_cast<size_t>(m));
  CHECK_THROWS_AS(chunk_coverage(0, 4), ArgumentError);
  CHECK_THROWS_AS(chunk_coverage(5, 4), ArgumentError);
}

TEST_CASE("chunk layout follows the ceiling cut points") {
  auto spans = chunk_layout(3, 7);
  REQUIRE(spans.size() == 3);
  CHECK(spans[0] == std::pair<int, int>{1, 2});
  CHECK(spans[1] == std::pair<int, int>{3, 4});
  CHECK(spans[2] == std::pair<int, int>{5, 7});

  // Chunks partition the layers for any (k, L).
  for (int k = 1; k <= 9; ++k)
    for (int L = 1; L <= 17; ++L) {
      auto sp = chunk_layout(k, L);
      int covered = 0;
      int prev_end = 0;
      for (auto [first, last] : sp) {
        if (first > last) continue;  // empty chunk when k > L
        CHECK(first == prev_end + 1);
        prev_end = last;
        covered += last - first + 1;
      }
      CHECK(covered == L);
      CHECK(prev_end == L);
    }
}

TEST_CASE("partial backprop equals the full pass on its suffix") {
  auto mlp = make_random_chain_mlp({3, 4, 4, 4, 1}, 24, 5);
  auto x = mlp->initial_params();
  std::vector<int> batch{0, 3, 5, 7, 11, 13};
  int L = mlp->layer_count();
  auto full = partial_backprop(*mlp, x, batch, L);
  CHECK(full.covered_from == 1);

  SUBCASE("suffix blocks are bit-identical, prefix blocks absent with zero work") {
    for (int suffix = 1; suffix <= L; ++suffix) {
      BackpropStats stats;
      auto part = partial_backprop(*mlp, x, batch, suffix, &stats);
      CHECK(part.covered_from == L - suffix + 1);
      for (int l = 1; l <= L; ++l) {
        if (l >= part.covered_from) {
          CHECK(same_bits(part.blocks[l - 1], full.blocks[l - 1]));
          CHECK(stats.layer_ops[l - 1] > 0);
        } else {
          CHECK(part.blocks[l - 1].empty());
          CHECK(stats.layer_ops[l - 1] == 0);
        }
      }
    }
  }

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(partial_backprop(*mlp, x, batch, 0), ArgumentError);
    CHECK_THROWS_AS(partial_backprop(*mlp, x, batch, L + 1), ArgumentError);
    std::vector<int> empty;
    CHECK_THROWS_AS(partial_backprop(*mlp, x, empty, 1), ArgumentError);
  }
}

TEST_CASE("quadratic partial backprop matches its closed-form gradient") {
  auto quad = make_random_quadratic(4, 3, 64, 0.1, 9);
  auto x = quad->initial_params();
  for (auto& blk : x)
    for (auto& v : blk) v = 0.25;
  auto batch = whole_dataset(*quad);
  auto grad = partial_backprop(*quad, x, batch, quad->layer_count()).blocks;
  // grad f = A^T (A x - b); compare against finite differences of the loss.
  const double h = 1e-6;
  for (size_t l = 0; l < x.size(); ++l)
    for (size_t c = 0; c < x[l].size(); ++c) {
      auto plus = x, minus = x;
      plus[l][c] += h;
      minus[l][c] -= h;
      double fd = (quad->loss(plus) - quad->loss(minus)) / (2 * h);
      CHECK(grad[l][c] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("aggregate averages each chunk over its contributors") {
  // L = 3, k = 3, one layer per chunk. Build gradients by hand.
  int k = 3, L = 3;
  std::vector<PartialGradient> grads(k);
  double v = -2.5;
  for (int j = 1; j <= k; ++j) {
    auto& g = grads[j - 1];
    g.blocks.resize(L);
    g.covered_from = L - suffix_layers(j, k, L) + 1;
    for (int l = g.covered_from; l <= L; ++l) g.blocks[l - 1] = {3.0 * j};
  }
  grads[2].blocks[0] = {v};  // chunk 1: only worker 3 contributes
  auto agg = aggregate(grads, k);
  CHECK(agg[2][0] == doctest::Approx((3.0 + 6.0 + 9.0) / 3.0));  // chunk 3 mean = 6
  CHECK(agg[0][0] == v);                                         // single contributor
}

TEST_CASE("aggregate matches brute-force chunk enumeration") {
  int k = 4, L = 11;
  Rng rng(77);
  std::vector<int> dims(L);
  for (auto& d : dims) d = 1 + static_cast<int>(rng.next_below(4));
  std::vector<PartialGradient> grads(k);
  for (int j = 1; j <= k; ++j) {
    auto& g = grads[j - 1];
    g.blocks.resize(L);
    g.covered_from = L - suffix_layers(j, k, L) + 1;
    for (int l = g.covered_from; l <= L; ++l) {
      g.blocks[l - 1].resize(dims[l - 1]);
      for (auto& x : g.blocks[l - 1]) x = 2.0 * rng.next_unit() - 1.0;
    }
  }
  auto agg = aggregate(grads, k);

  auto spans = chunk_layout(k, L);
  for (int m = 1; m <= k; ++m) {
    auto workers = chunk_coverage(m, k);
    for (int l = spans[m - 1].first; l <= spans[m - 1].second; ++l)
      for (int c = 0; c < dims[l - 1]; ++c) {
        double sum = 0.0;
        for (int w : workers) sum += grads[w - 1].blocks[l - 1][c];
        CHECK(agg[l - 1][c] == doctest::Approx(sum / workers.size()));
      }
  }
}

TEST_CASE("aggregate rejects inconsistent coverage") {
  int k = 3, L = 6;
  std::vector<PartialGradient> grads(k);
  for (int j = 1; j <= k; ++j) {
    auto& g = grads[j - 1];
    g.blocks.resize(L);
    g.covered_from = L - suffix_layers(j, k, L) + 1;
    for (int l = g.covered_from; l <= L; ++l) g.blocks[l - 1] = {1.0};
  }
  auto broken = grads;
  broken[0].covered_from -= 1;  // claims more coverage than the suffix rule
  CHECK_THROWS_AS(aggregate(broken, k), ProtocolError);

  auto missing = grads;
  missing[1].blocks[L - 1].clear();  // absent block inside the covered range
  CHECK_THROWS_AS(aggregate(missing, k), ProtocolError);
}

TEST_CASE("sgd run shapes and schedule validation") {
  auto quad = make_random_quadratic(8, 2, 64, 0.05, 3);
  SpbConfig cfg;
  cfg.k = 2;
  cfg.B = 8;
  cfg.lr_base = 1e-4;
  auto res = spb_sgd_run(*quad, cfg, 25, StepSchedule::Constant, 11);
  CHECK(res.avg_loss.size() == 25);
  CHECK(res.step_size.size() == 25);
  CHECK(res.avg_subopt.size() == 25);  // quadratic has a known optimum
  for (double g : res.step_size) CHECK(g == 1e-4);

  auto mlp = make_random_chain_mlp({3, 4, 1}, 16, 3);
  cfg.R = 1.0;
  cfg.V = 1.0;
  CHECK_THROWS_AS(spb_sgd_run(*mlp, cfg, 5, StepSchedule::Theorem1, 1), ConfigError);

  SpbConfig bad = cfg;
  bad.B = 7;  // not divisible by k
  CHECK_THROWS_AS(spb_sgd_run(*quad, bad, 5, StepSchedule::Constant, 1), ArgumentError);
}

TEST_CASE("theorem1 step sizes follow the schedule") {
  auto quad = make_random_quadratic(8, 2, 64, 0.05, 3);
  SpbConfig cfg;
  cfg.k = 4;
  cfg.B = 16;
  cfg.R = 2.0;
  cfg.V = 5.0;
  auto res = spb_sgd_run(*quad, cfg, 10, StepSchedule::Theorem1, 11);
  double beta = *quad->beta();
  for (int s = 1; s <= 10; ++s) {
    double eta = (cfg.R / cfg.V) * std::sqrt(2.0 / s);
    CHECK(res.step_size[s - 1] == doctest::Approx(1.0 / (beta + 1.0 / eta)));
  }
}

TEST_CASE("empirical variance: k=1 spb estimator equals the baseline exactly") {
  auto quad = make_random_quadratic(8, 2, 64, 0.05, 21);
  auto x = quad->initial_params();
  SpbConfig cfg;
  cfg.k = 1;
  cfg.B = 8;
  auto est = empirical_variance(*quad, cfg, x, 200, 5);
  CHECK(est.spb == est.baseline);
  CHECK(est.spb_se == est.baseline_se);
}

TEST_CASE("empirical variance approaches the exact decomposition") {
  auto quad = make_random_quadratic(8, 2, 128, 0.05, 23);
  auto x = quad->initial_params();
  for (auto& blk : x)
    for (auto& v : blk) v = 0.1;
  SpbConfig cfg;
  cfg.k = 4;
  cfg.B = 32;
  auto est = empirical_variance(*quad, cfg, x, 4000, 9);
  double exact = exact_spb_variance(*quad, cfg, x);
  CHECK(std::abs(est.spb - exact) <= 4.0 * est.spb_se);

  // Exact per-chunk variances also bound their Monte-Carlo estimates.
  auto p = exact_chunk_variances(*quad, x, cfg.k);
  for (int m = 0; m < cfg.k; ++m)
    CHECK(std::abs(est.p_hat[m] - p[m]) <= 4.0 * est.p_se[m] + 1e-12);

  // Doubling B halves the baseline estimate (1/B law).
  SpbConfig cfg2 = cfg;
  cfg2.B = 64;
  auto est2 = empirical_variance(*quad, cfg2, x, 4000, 9);
  CHECK(std::abs(est2.baseline - est.baseline / 2.0) <=
        4.0 * (est2.baseline_se + est.baseline_se / 2.0));
}

TEST_CASE("measured P bounds every per-sample gradient") {
  auto quad = make_random_quadratic(4, 4, 64, 0.1, 31);
  auto x = quad->initial_params();
  double P = measured_grad_norm_bound(*quad, x);
  for (int s = 0; s < quad->dataset_size(); ++s) {
    auto g = quad->zeros_like();
    quad->add_sample_gradient(x, s, quad->layer_count(), g);
    double norm_sq = 0.0;
    for (const auto& blk : g)
      for (double v : blk) norm_sq += v * v;
    CHECK(std::sqrt(norm_sq) <= P + 1e-12);
  }
}
