#include "jigsaw/spb/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>

#include "jigsaw/errors.hpp"
#include "jigsaw/rng.hpp"

namespace jigsaw::spb {

Params LayeredModel::zeros_like() const {
  Params p(block_dims_.size());
  for (size_t i = 0; i < block_dims_.size(); ++i) p[i].assign(block_dims_[i], 0.0);
  return p;
}

// ---------------------------------------------------------------------------
// BlockQuadratic

BlockQuadratic::BlockQuadratic(std::vector<double> a_rowmajor, std::vector<double> b, int blocks)
    : a_(std::move(a_rowmajor)), b_(std::move(b)) {
  if (blocks < 1) throw ArgumentError("quadratic: blocks must be >= 1");
  if (b_.empty()) throw ArgumentError("quadratic: empty dataset");
  dataset_size_ = static_cast<int>(b_.size());
  if (a_.size() % b_.size() != 0) throw ArgumentError("quadratic: A shape mismatch");
  dim_ = static_cast<int>(a_.size() / b_.size());
  if (dim_ % blocks != 0) throw ArgumentError("quadratic: dim not divisible into blocks");
  int bd = dim_ / blocks;
  block_dims_.assign(blocks, bd);
  initial_params_ = zeros_like();

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(
      a_.data(), dataset_size_, dim_);
  Eigen::Map<const Eigen::VectorXd> bv(b_.data(), dataset_size_);

  Eigen::MatrixXd gram = A.transpose() * A;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  beta_ = eig.eigenvalues().maxCoeff();
  if (eig.eigenvalues().minCoeff() <= 1e-9 * beta_)
    throw ArgumentError("quadratic: A does not have full column rank");

  Eigen::VectorXd xs = gram.ldlt().solve(A.transpose() * bv);
  x_star_.resize(blocks);
  for (int l = 0; l < blocks; ++l)
    x_star_[l].assign(xs.data() + l * bd, xs.data() + (l + 1) * bd);
  f_star_ = 0.5 * (A * xs - bv).squaredNorm();
}

double BlockQuadratic::residual(const Params& x, int sample) const {
  const double* row = a_.data() + static_cast<size_t>(sample) * dim_;
  double acc = 0.0;
  int off = 0;
  for (const auto& blk : x) {
    for (double v : blk) acc += row[off++] * v;
  }
  return acc - b_[sample];
}

double BlockQuadratic::loss(const Params& x) const {
  double total = 0.0;
  for (int s = 0; s < dataset_size_; ++s) {
    double r = residual(x, s);
    total += 0.5 * r * r;
  }
  return total;
}

void BlockQuadratic::add_sample_gradient(const Params& x, int sample, int suffix, Params& acc,
                                         BackpropStats* stats) const {
  int L = layer_count();
  if (suffix < 1 || suffix > L) throw ArgumentError("suffix out of range");
  if (sample < 0 || sample >= dataset_size_) throw ArgumentError("sample out of range");
  // Forward pass: residual needs all blocks regardless of suffix.
  double r = residual(x, sample);
  double scale = static_cast<double>(dataset_size_) * r;
  const double* row = a_.data() + static_cast<size_t>(sample) * dim_;
  int bd = block_dims_[0];
  for (int l = L - suffix; l < L; ++l) {
    const double* rowl = row + l * bd;
    for (int c = 0; c < bd; ++c) acc[l][c] += scale * rowl[c];
    if (stats) stats->layer_ops[l] += bd;
  }
}

// ---------------------------------------------------------------------------
// ChainMlp

ChainMlp::ChainMlp(std::vector<int> widths, std::vector<std::vector<double>> inputs,
                   std::vector<double> targets, Params weights)
    : widths_(std::move(widths)), inputs_(std::move(inputs)), targets_(std::move(targets)) {
  if (widths_.size() < 2) throw ArgumentError("mlp: need at least one layer");
  if (widths_.back() != 1) throw ArgumentError("mlp: output must be scalar");
  if (inputs_.empty() || inputs_.size() != targets_.size())
    throw ArgumentError("mlp: dataset shape mismatch");
  dataset_size_ = static_cast<int>(inputs_.size());
  int L = static_cast<int>(widths_.size()) - 1;
  block_dims_.resize(L);
  for (int l = 0; l < L; ++l) block_dims_[l] = widths_[l + 1] * widths_[l] + widths_[l + 1];
  for (int l = 0; l < L; ++l)
    if (static_cast<int>(weights[l].size()) != block_dims_[l])
      throw ArgumentError("mlp: weight block size mismatch");
  initial_params_ = std::move(weights);
}

namespace {

// Forward through the chain; activations[l] is h_l (activations[0] = input).
void mlp_forward(const std::vector<int>& widths, const Params& x,
                 const std::vector<double>& input, std::vector<std::vector<double>>& activations) {
  int L = static_cast<int>(widths.size()) - 1;
  activations.resize(L + 1);
  activations[0] = input;
  for (int l = 1; l <= L; ++l) {
    int out_w = widths[l], in_w = widths[l - 1];
    const double* W = x[l - 1].data();
    const double* bias = W + out_w * in_w;
    auto& h = activations[l];
    h.assign(out_w, 0.0);
    const auto& prev = activations[l - 1];
    for (int o = 0; o < out_w; ++o) {
      double z = bias[o];
      const double* wrow = W + o * in_w;
      for (int i = 0; i < in_w; ++i) z += wrow[i] * prev[i];
      h[o] = (l == L) ? z : std::tanh(z);
    }
  }
}

}  // namespace

double ChainMlp::sample_loss(const Params& x, int sample) const {
  std::vector<std::vector<double>> acts;
  mlp_forward(widths_, x, inputs_[sample], acts);
  double d = acts.back()[0] - targets_[sample];
  return 0.5 * d * d;
}

double ChainMlp::loss(const Params& x) const {
  double total = 0.0;
  for (int s = 0; s < dataset_size_; ++s) total += sample_loss(x, s);
  return total / dataset_size_;
}

void ChainMlp::add_sample_gradient(const Params& x, int sample, int suffix, Params& acc,
                                   BackpropStats* stats) const {
  int L = layer_count();
  if (suffix < 1 || suffix > L) throw ArgumentError("suffix out of range");
  if (sample < 0 || sample >= dataset_size_) throw ArgumentError("sample out of range");

  std::vector<std::vector<double>> acts;
  mlp_forward(widths_, x, inputs_[sample], acts);

  int stop = L - suffix + 1;  // 1-based first layer of the covered suffix
  // delta = dLoss/dz_l, starting at the linear output layer.
  std::vector<double> delta{acts[L][0] - targets_[sample]};
  std::vector<double> next_delta;
  for (int l = L; l >= stop; --l) {
    int out_w = widths_[l], in_w = widths_[l - 1];
    const double* W = x[l - 1].data();
    double* gW = acc[l - 1].data();
    double* gb = gW + out_w * in_w;
    const auto& prev = acts[l - 1];
    long long ops = 0;
    for (int o = 0; o < out_w; ++o) {
      double d = delta[o];
      double* grow = gW + o * in_w;
      for (int i = 0; i < in_w; ++i) grow[i] += d * prev[i];
      gb[o] += d;
      ops += in_w + 1;
    }
    if (l > stop) {
      // Propagate delta to layer l-1 only while the pass continues.
      next_delta.assign(in_w, 0.0);
      for (int o = 0; o < out_w; ++o) {
        double d = delta[o];
        const double* wrow = W + o * in_w;
        for (int i = 0; i < in_w; ++i) next_delta[i] += d * wrow[i];
      }
      for (int i = 0; i < in_w; ++i) next_delta[i] *= 1.0 - prev[i] * prev[i];
      ops += static_cast<long long>(out_w) * in_w + in_w;
      delta.swap(next_delta);
    }
    if (stats) stats->layer_ops[l - 1] += ops;
  }
}

// ---------------------------------------------------------------------------
// Instance generators

std::unique_ptr<BlockQuadratic> make_random_quadratic(int blocks, int block_dim, int samples,
                                                      double target_noise, std::uint64_t seed) {
  Rng rng = Rng(seed).split(0x9A4DULL);
  int dim = blocks * block_dim;
  std::vector<double> a(static_cast<size_t>(samples) * dim);
  for (auto& v : a) v = rng.next_gaussian();
  std::vector<double> x_true(dim);
  for (auto& v : x_true) v = rng.next_gaussian();
  std::vector<double> b(samples);
  for (int s = 0; s < samples; ++s) {
    double acc = 0.0;
    for (int c = 0; c < dim; ++c) acc += a[static_cast<size_t>(s) * dim + c] * x_true[c];
    b[s] = acc + target_noise * rng.next_gaussian();
  }
  return std::make_unique<BlockQuadratic>(std::move(a), std::move(b), blocks);
}

std::unique_ptr<ChainMlp> make_random_chain_mlp(const std::vector<int>& widths, int samples,
                                                std::uint64_t seed) {
  Rng rng = Rng(seed).split(0x313aULL);
  int L = static_cast<int>(widths.size()) - 1;
  Params w(L);
  for (int l = 0; l < L; ++l) {
    int n = widths[l + 1] * widths[l] + widths[l + 1];
    w[l].resize(n);
    double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    for (auto& v : w[l]) v = scale * (2.0 * rng.next_unit() - 1.0);
  }
  std::vector<std::vector<double>> inputs(samples);
  std::vector<double> targets(samples);
  for (int s = 0; s < samples; ++s) {
    inputs[s].resize(widths[0]);
    double t = 0.0;
    for (int i = 0; i < widths[0]; ++i) {
      inputs[s][i] = rng.next_gaussian();
      t += inputs[s][i];
    }
    targets[s] = std::tanh(t) + 0.1 * rng.next_gaussian();
  }
  return std::make_unique<ChainMlp>(widths, std::move(inputs), std::move(targets), std::move(w));
}

}  // namespace jigsaw::spb
