#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace jigsaw::spb {

// Parameters or gradients, one vector per layer block.
using Params = std::vector<std::vector<double>>;

enum class ModelKind { ChainMlp, ConvexQuadratic };

// Operation counts of one reverse pass, indexed by layer (0-based). Used to
// check that a partial reverse pass really does no work for skipped layers.
struct BackpropStats {
  std::vector<long long> layer_ops;
};

// An L-layer differentiable model over a finite dataset. The loss is the
// dataset-mean (chain MLP) or dataset-sum (block quadratic) of per-sample
// losses; either way per-sample gradients are unbiased estimates of the full
// gradient. All methods are const and thread-safe; parameters are passed in
// explicitly.
class LayeredModel {
 public:
  virtual ~LayeredModel() = default;

  virtual ModelKind kind() const = 0;
  int layer_count() const { return static_cast<int>(block_dims_.size()); }
  const std::vector<int>& block_dims() const { return block_dims_; }
  int dataset_size() const { return dataset_size_; }
  const Params& initial_params() const { return initial_params_; }
  void set_initial_params(Params x) { initial_params_ = std::move(x); }

  // f(x) over the full dataset.
  virtual double loss(const Params& x) const = 0;

  // Adds the gradient of one sample at x into `acc`, for the last `suffix`
  // layers only. Prefix blocks of `acc` are never touched; the reverse pass
  // stops once the suffix is covered. The values written for covered layers
  // are identical (same floating-point operations) for every suffix that
  // covers them.
  virtual void add_sample_gradient(const Params& x, int sample, int suffix, Params& acc,
                                   BackpropStats* stats = nullptr) const = 0;

  // Smoothness constant, when the model defines one.
  virtual std::optional<double> beta() const { return std::nullopt; }
  // f(x*) when the optimum is computable in closed form.
  virtual std::optional<double> optimum_value() const { return std::nullopt; }

  // Allocates an all-zero parameter/gradient vector of this model's shape.
  Params zeros_like() const;

 protected:
  std::vector<int> block_dims_;
  int dataset_size_ = 0;
  Params initial_params_;
};

// f(x) = 0.5 * ||A x - b||^2 with x split into L equal blocks. A has full
// column rank, so x* and f(x*) are available in closed form. Per-sample
// gradient of sample i is N * a_i * (a_i . x - b_i), an unbiased estimate of
// the full gradient under uniform sampling.
class BlockQuadratic final : public LayeredModel {
 public:
  // A: samples x dim, row-major. b: samples.
  BlockQuadratic(std::vector<double> a_rowmajor, std::vector<double> b, int blocks);

  ModelKind kind() const override { return ModelKind::ConvexQuadratic; }
  double loss(const Params& x) const override;
  void add_sample_gradient(const Params& x, int sample, int suffix, Params& acc,
                           BackpropStats* stats = nullptr) const override;
  std::optional<double> beta() const override { return beta_; }
  std::optional<double> optimum_value() const override { return f_star_; }
  const Params& optimum() const { return x_star_; }
  int dim() const { return dim_; }

 private:
  double residual(const Params& x, int sample) const;

  std::vector<double> a_;  // row-major, samples x dim
  std::vector<double> b_;
  int dim_ = 0;
  double beta_ = 0.0;    // largest eigenvalue of A^T A
  double f_star_ = 0.0;
  Params x_star_;
};

// Chain MLP: layer l computes h_l = tanh(W_l h_{l-1} + b_l), except the last
// layer which is affine with scalar output. Per-sample loss 0.5*(out - y)^2,
// full loss is the dataset mean. Block l holds W_l flattened row-major
// followed by b_l.
class ChainMlp final : public LayeredModel {
 public:
  // widths: [input, hidden..., 1]; layer count is widths.size() - 1.
  ChainMlp(std::vector<int> widths, std::vector<std::vector<double>> inputs,
           std::vector<double> targets, Params weights);

  ModelKind kind() const override { return ModelKind::ChainMlp; }
  double loss(const Params& x) const override;
  void add_sample_gradient(const Params& x, int sample, int suffix, Params& acc,
                           BackpropStats* stats = nullptr) const override;
  double sample_loss(const Params& x, int sample) const;

 private:
  std::vector<int> widths_;
  std::vector<std::vector<double>> inputs_;
  std::vector<double> targets_;
};

// Deterministic random instances for tests and verification runs.
std::unique_ptr<BlockQuadratic> make_random_quadratic(int blocks, int block_dim, int samples,
                                                      double target_noise, std::uint64_t seed);
std::unique_ptr<ChainMlp> make_random_chain_mlp(const std::vector<int>& widths, int samples,
                                                std::uint64_t seed);

}  // namespace jigsaw::spb
