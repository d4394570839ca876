#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Desk-scale objectives supplying (loss, gradient) pairs. Everything is
// deterministic given (params, seed): the seed selects the mini-batch,
// the gradient noise draw, and the dropout masks, so identical calls
// return identical results on any platform. Problems are immutable after
// construction and safe to evaluate from multiple threads.

namespace cprop {

struct SyntheticDataset {
  std::size_t n = 0;
  std::size_t dim = 0;
  int num_classes = 0;
  std::vector<double> inputs;  // n x dim, row-major
  std::vector<int> labels;     // size n, values in [0, num_classes)

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(inputs.data() + i * dim, dim);
  }
};

// Class-balanced Gaussian blobs; class centers are placed at distance
// ~margin from the origin with unit within-class spread. Samples are
// interleaved by class so contiguous mini-batches stay balanced.
SyntheticDataset gaussian_blobs(int n_samples, int dim, int num_classes, double margin,
                                std::uint64_t seed);

// Classic two-spirals set: 2-D, two classes, unit spiral arms with
// additive noise.
SyntheticDataset two_spirals(int n_samples, double noise, std::uint64_t seed);

// Reads an IDX image/label file pair (MNIST family): image magic
// 0x00000803, label magic 0x00000801, big-endian dimensions, u8 payload.
// Pixels are scaled to [0, 1]. Throws std::runtime_error on malformed
// input.
SyntheticDataset load_idx(const std::string& images_path, const std::string& labels_path);

class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;

  // Stochastic evaluation: mini-batch or noisy (loss, gradient) at
  // params. Deterministic given (params, seed).
  virtual double eval(std::span<const double> params, std::uint64_t seed,
                      std::vector<double>& grad) const = 0;

  // Deterministic objective: noiseless / full-batch loss. This is what
  // the harness logs as training loss.
  virtual double full_loss(std::span<const double> params) const = 0;

  // Gradient of full_loss; the target of finite-difference checks.
  virtual void full_gradient(std::span<const double> params, std::vector<double>& grad) const = 0;

  virtual std::vector<double> initial_params(std::uint64_t seed) const = 0;
};

// loss = 0.5 * theta' D theta with D diagonal, log-spaced in [1, kappa].
// eval() returns the exact loss and a gradient with Normal(0, noise^2)
// perturbation per coordinate. Unique minimum at 0 with loss 0.
class NoisyQuadratic : public Problem {
 public:
  NoisyQuadratic(int dim, double kappa, double noise);

  std::size_t dim() const override { return diag_.size(); }
  std::string name() const override { return "noisy_quadratic"; }
  double eval(std::span<const double> params, std::uint64_t seed,
              std::vector<double>& grad) const override;
  double full_loss(std::span<const double> params) const override;
  void full_gradient(std::span<const double> params, std::vector<double>& grad) const override;
  std::vector<double> initial_params(std::uint64_t seed) const override;

  const std::vector<double>& diagonal() const { return diag_; }

 private:
  std::vector<double> diag_;
  double noise_;
};

// Chained Rosenbrock; minimum 0 at the all-ones vector. Deterministic:
// eval() ignores the seed.
class Rosenbrock : public Problem {
 public:
  explicit Rosenbrock(int dim);

  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "rosenbrock"; }
  double eval(std::span<const double> params, std::uint64_t seed,
              std::vector<double>& grad) const override;
  double full_loss(std::span<const double> params) const override;
  void full_gradient(std::span<const double> params, std::vector<double>& grad) const override;
  std::vector<double> initial_params(std::uint64_t seed) const override;

 private:
  std::size_t dim_;
};

// Binary cross-entropy over a two-blob dataset, no bias term (the blobs
// are symmetric about the origin). Mini-batches are contiguous blocks;
// the seed picks the block.
class SyntheticLogistic : public Problem {
 public:
  SyntheticLogistic(int n_samples, int dim, double margin, std::uint64_t seed, int batch_size);

  std::size_t dim() const override { return data_.dim; }
  std::string name() const override { return "logistic"; }
  double eval(std::span<const double> params, std::uint64_t seed,
              std::vector<double>& grad) const override;
  double full_loss(std::span<const double> params) const override;
  void full_gradient(std::span<const double> params, std::vector<double>& grad) const override;
  std::vector<double> initial_params(std::uint64_t seed) const override;

  const SyntheticDataset& dataset() const { return data_; }
  std::size_t num_batches() const { return data_.n / batch_; }

 private:
  SyntheticDataset data_;
  std::size_t batch_;
};

// Fully-connected network with softmax cross-entropy and hand-written
// backpropagation. Hidden activations are relu or tanh; optional
// inverted dropout on hidden activations, masks drawn per sample from
// the batch seed. Parameters are flattened [W0, b0, W1, b1, ...] with
// row-major weights.
class TinyMlp : public Problem {
 public:
  TinyMlp(std::vector<int> widths, std::string activation, SyntheticDataset dataset,
          std::uint64_t seed, double dropout, int batch_size);

  std::size_t dim() const override { return n_params_; }
  std::string name() const override { return "mlp"; }
  double eval(std::span<const double> params, std::uint64_t seed,
              std::vector<double>& grad) const override;
  double full_loss(std::span<const double> params) const override;
  void full_gradient(std::span<const double> params, std::vector<double>& grad) const override;
  std::vector<double> initial_params(std::uint64_t seed) const override;

  // Evaluation-mode class probabilities for one input row.
  void forward_probs(std::span<const double> params, std::span<const double> input,
                     std::vector<double>& probs) const;

  const SyntheticDataset& dataset() const { return data_; }
  const std::vector<int>& widths() const { return widths_; }
  std::size_t num_batches() const { return data_.n / batch_; }

 private:
  // Loss+gradient over samples [begin, end); dropout masks drawn from
  // mask_seed when dropout is active and use_dropout is set.
  double batch_eval(std::span<const double> params, std::size_t begin, std::size_t end,
                    bool use_dropout, std::uint64_t mask_seed, std::vector<double>* grad) const;

  std::vector<int> widths_;
  std::string activation_;
  SyntheticDataset data_;
  std::uint64_t seed_;
  double dropout_;
  std::size_t batch_;
  std::size_t n_params_;
};

}  // namespace cprop
