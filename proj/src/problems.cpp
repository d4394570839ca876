#include "cprop/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "cprop/rng.hpp"

namespace cprop {

// ---------------------------------------------------------------------------
// Synthetic datasets
// ---------------------------------------------------------------------------

SyntheticDataset gaussian_blobs(int n_samples, int dim, int num_classes, double margin,
                                std::uint64_t seed) {
  if (n_samples < 1 || dim < 1 || num_classes < 2)
    throw std::invalid_argument("gaussian_blobs: need n_samples >= 1, dim >= 1, classes >= 2");
  if (n_samples % num_classes != 0)
    throw std::invalid_argument("gaussian_blobs: n_samples must be divisible by num_classes");

  SplitMix64 rng(mix_seed(seed, 0xb10b5));

  // Unit-direction class centers at radius margin/2; two classes are
  // placed antipodally so the class-mean distance equals margin.
  std::vector<double> centers(static_cast<std::size_t>(num_classes) * dim);
  auto draw_unit = [&](double* out) {
    double norm = 0.0;
    for (int j = 0; j < dim; ++j) {
      out[j] = rng.normal();
      norm += out[j] * out[j];
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) { out[0] = 1.0; norm = 1.0; }
    for (int j = 0; j < dim; ++j) out[j] /= norm;
  };
  if (num_classes == 2) {
    draw_unit(centers.data());
    for (int j = 0; j < dim; ++j) {
      centers[j] *= margin / 2.0;
      centers[dim + j] = -centers[j];
    }
  } else {
    for (int k = 0; k < num_classes; ++k) {
      draw_unit(centers.data() + static_cast<std::size_t>(k) * dim);
      for (int j = 0; j < dim; ++j) centers[static_cast<std::size_t>(k) * dim + j] *= margin / 2.0;
    }
  }

  SyntheticDataset data;
  data.n = static_cast<std::size_t>(n_samples);
  data.dim = static_cast<std::size_t>(dim);
  data.num_classes = num_classes;
  data.inputs.resize(data.n * data.dim);
  data.labels.resize(data.n);
  for (std::size_t i = 0; i < data.n; ++i) {
    const int k = static_cast<int>(i % num_classes);  // interleaved, balanced
    data.labels[i] = k;
    for (std::size_t j = 0; j < data.dim; ++j)
      data.inputs[i * data.dim + j] = centers[static_cast<std::size_t>(k) * dim + j] + rng.normal();
  }
  return data;
}

SyntheticDataset two_spirals(int n_samples, double noise, std::uint64_t seed) {
  if (n_samples < 2 || n_samples % 2 != 0)
    throw std::invalid_argument("two_spirals: n_samples must be even and >= 2");
  SplitMix64 rng(mix_seed(seed, 0x5617a1));

  SyntheticDataset data;
  data.n = static_cast<std::size_t>(n_samples);
  data.dim = 2;
  data.num_classes = 2;
  data.inputs.resize(data.n * 2);
  data.labels.resize(data.n);
  const int per_class = n_samples / 2;
  for (std::size_t i = 0; i < data.n; ++i) {
    const int k = static_cast<int>(i % 2);
    const int j = static_cast<int>(i / 2);
    const double t = per_class > 1 ? static_cast<double>(j) / (per_class - 1) : 0.0;
    const double r = 0.3 + 2.7 * t;
    const double phi = 1.75 * 2.0 * std::numbers::pi * t + k * std::numbers::pi;
    data.labels[i] = k;
    data.inputs[i * 2 + 0] = r * std::cos(phi) + noise * rng.normal();
    data.inputs[i * 2 + 1] = r * std::sin(phi) + noise * rng.normal();
  }
  return data;
}

// ---------------------------------------------------------------------------
// IDX reader
// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("idx: truncated header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

SyntheticDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  const std::uint32_t img_magic = read_be_u32(img, images_path);
  if (img_magic != 0x00000803u)
    throw std::runtime_error("idx: bad image magic in " + images_path);
  const std::uint32_t n = read_be_u32(img, images_path);
  const std::uint32_t rows = read_be_u32(img, images_path);
  const std::uint32_t cols = read_be_u32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);
  const std::uint32_t lab_magic = read_be_u32(lab, labels_path);
  if (lab_magic != 0x00000801u)
    throw std::runtime_error("idx: bad label magic in " + labels_path);
  const std::uint32_t n_labels = read_be_u32(lab, labels_path);
  if (n != n_labels)
    throw std::runtime_error("idx: image/label count mismatch (" + std::to_string(n) + " vs " +
                             std::to_string(n_labels) + ")");

  SyntheticDataset data;
  data.n = n;
  data.dim = static_cast<std::size_t>(rows) * cols;
  data.inputs.resize(data.n * data.dim);
  data.labels.resize(data.n);

  std::vector<unsigned char> pixels(data.n * data.dim);
  img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!img) throw std::runtime_error("idx: truncated pixel data in " + images_path);
  for (std::size_t i = 0; i < pixels.size(); ++i) data.inputs[i] = pixels[i] / 255.0;

  std::vector<unsigned char> labels(data.n);
  lab.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  if (!lab) throw std::runtime_error("idx: truncated label data in " + labels_path);
  int max_label = 0;
  for (std::size_t i = 0; i < data.n; ++i) {
    data.labels[i] = labels[i];
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = max_label + 1;
  return data;
}

// ---------------------------------------------------------------------------
// NoisyQuadratic
// ---------------------------------------------------------------------------

NoisyQuadratic::NoisyQuadratic(int dim, double kappa, double noise) : noise_(noise) {
  if (dim < 1) throw std::invalid_argument("noisy_quadratic: dim must be >= 1");
  if (kappa < 1.0) throw std::invalid_argument("noisy_quadratic: kappa must be >= 1");
  if (noise < 0.0) throw std::invalid_argument("noisy_quadratic: noise must be >= 0");
  diag_.resize(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i)
    diag_[static_cast<std::size_t>(i)] =
        dim == 1 ? 1.0 : std::exp(std::log(kappa) * i / (dim - 1.0));
}

double NoisyQuadratic::eval(std::span<const double> params, std::uint64_t seed,
                            std::vector<double>& grad) const {
  full_gradient(params, grad);
  if (noise_ > 0.0) {
    SplitMix64 rng(seed);
    for (double& gi : grad) gi += noise_ * rng.normal();
  }
  return full_loss(params);
}

double NoisyQuadratic::full_loss(std::span<const double> params) const {
  if (params.size() != diag_.size()) throw std::invalid_argument("noisy_quadratic: bad shape");
  double loss = 0.0;
  for (std::size_t i = 0; i < diag_.size(); ++i) loss += 0.5 * diag_[i] * params[i] * params[i];
  return loss;
}

void NoisyQuadratic::full_gradient(std::span<const double> params,
                                   std::vector<double>& grad) const {
  if (params.size() != diag_.size()) throw std::invalid_argument("noisy_quadratic: bad shape");
  grad.resize(diag_.size());
  for (std::size_t i = 0; i < diag_.size(); ++i) grad[i] = diag_[i] * params[i];
}

std::vector<double> NoisyQuadratic::initial_params(std::uint64_t seed) const {
  SplitMix64 rng(mix_seed(seed, 0x1271));
  std::vector<double> theta(diag_.size());
  for (double& x : theta) x = rng.normal();
  return theta;
}

// ---------------------------------------------------------------------------
// Rosenbrock
// ---------------------------------------------------------------------------

Rosenbrock::Rosenbrock(int dim) : dim_(static_cast<std::size_t>(dim)) {
  if (dim < 2) throw std::invalid_argument("rosenbrock: dim must be >= 2");
}

double Rosenbrock::eval(std::span<const double> params, std::uint64_t /*seed*/,
                        std::vector<double>& grad) const {
  full_gradient(params, grad);
  return full_loss(params);
}

double Rosenbrock::full_loss(std::span<const double> params) const {
  if (params.size() != dim_) throw std::invalid_argument("rosenbrock: bad shape");
  double loss = 0.0;
  for (std::size_t i = 0; i + 1 < dim_; ++i) {
    const double a = params[i + 1] - params[i] * params[i];
    const double b = 1.0 - params[i];
    loss += 100.0 * a * a + b * b;
  }
  return loss;
}

void Rosenbrock::full_gradient(std::span<const double> params, std::vector<double>& grad) const {
  if (params.size() != dim_) throw std::invalid_argument("rosenbrock: bad shape");
  grad.assign(dim_, 0.0);
  for (std::size_t i = 0; i + 1 < dim_; ++i) {
    const double a = params[i + 1] - params[i] * params[i];
    grad[i] += -400.0 * params[i] * a - 2.0 * (1.0 - params[i]);
    grad[i + 1] += 200.0 * a;
  }
}

std::vector<double> Rosenbrock::initial_params(std::uint64_t seed) const {
  SplitMix64 rng(mix_seed(seed, 0x40531));
  std::vector<double> theta(dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    theta[i] = (i % 2 == 0 ? -1.2 : 1.0) + rng.uniform(-0.1, 0.1);
  return theta;
}

// ---------------------------------------------------------------------------
// SyntheticLogistic
// ---------------------------------------------------------------------------

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// -y*log(p) - (1-y)*log(1-p) computed from the logit.
double bce_from_logit(double z, int y) {
  return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

SyntheticLogistic::SyntheticLogistic(int n_samples, int dim, double margin, std::uint64_t seed,
                                     int batch_size)
    : data_(gaussian_blobs(n_samples, dim, 2, margin, seed)),
      batch_(static_cast<std::size_t>(batch_size)) {
  if (batch_size < 1 || static_cast<std::size_t>(batch_size) > data_.n)
    throw std::invalid_argument("logistic: need 1 <= batch_size <= n_samples");
}

double SyntheticLogistic::eval(std::span<const double> params, std::uint64_t seed,
                               std::vector<double>& grad) const {
  if (params.size() != data_.dim) throw std::invalid_argument("logistic: bad shape");
  const std::size_t block = seed % num_batches();
  const std::size_t begin = block * batch_;
  const std::size_t end = begin + batch_;
  grad.assign(data_.dim, 0.0);
  double loss = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    auto x = data_.row(i);
    double z = 0.0;
    for (std::size_t j = 0; j < data_.dim; ++j) z += params[j] * x[j];
    const int y = data_.labels[i];
    loss += bce_from_logit(z, y);
    const double r = sigmoid(z) - y;
    for (std::size_t j = 0; j < data_.dim; ++j) grad[j] += r * x[j];
  }
  const double inv = 1.0 / static_cast<double>(batch_);
  for (double& gj : grad) gj *= inv;
  return loss * inv;
}

double SyntheticLogistic::full_loss(std::span<const double> params) const {
  if (params.size() != data_.dim) throw std::invalid_argument("logistic: bad shape");
  double loss = 0.0;
  for (std::size_t i = 0; i < data_.n; ++i) {
    auto x = data_.row(i);
    double z = 0.0;
    for (std::size_t j = 0; j < data_.dim; ++j) z += params[j] * x[j];
    loss += bce_from_logit(z, data_.labels[i]);
  }
  return loss / static_cast<double>(data_.n);
}

void SyntheticLogistic::full_gradient(std::span<const double> params,
                                      std::vector<double>& grad) const {
  if (params.size() != data_.dim) throw std::invalid_argument("logistic: bad shape");
  grad.assign(data_.dim, 0.0);
  for (std::size_t i = 0; i < data_.n; ++i) {
    auto x = data_.row(i);
    double z = 0.0;
    for (std::size_t j = 0; j < data_.dim; ++j) z += params[j] * x[j];
    const double r = sigmoid(z) - data_.labels[i];
    for (std::size_t j = 0; j < data_.dim; ++j) grad[j] += r * x[j];
  }
  for (double& gj : grad) gj /= static_cast<double>(data_.n);
}

std::vector<double> SyntheticLogistic::initial_params(std::uint64_t /*seed*/) const {
  return std::vector<double>(data_.dim, 0.0);
}

// ---------------------------------------------------------------------------
// TinyMlp
// ---------------------------------------------------------------------------

TinyMlp::TinyMlp(std::vector<int> widths, std::string activation, SyntheticDataset dataset,
                 std::uint64_t seed, double dropout, int batch_size)
    : widths_(std::move(widths)),
      activation_(std::move(activation)),
      data_(std::move(dataset)),
      seed_(seed),
      dropout_(dropout),
      batch_(static_cast<std::size_t>(batch_size)) {
  if (widths_.size() < 2) throw std::invalid_argument("mlp: need at least input and output widths");
  for (int w : widths_)
    if (w < 1) throw std::invalid_argument("mlp: widths must be >= 1");
  if (static_cast<std::size_t>(widths_.front()) != data_.dim)
    throw std::invalid_argument("mlp: input width " + std::to_string(widths_.front()) +
                                " does not match dataset dim " + std::to_string(data_.dim));
  if (widths_.back() != data_.num_classes)
    throw std::invalid_argument("mlp: output width " + std::to_string(widths_.back()) +
                                " does not match dataset classes " +
                                std::to_string(data_.num_classes));
  if (activation_ != "relu" && activation_ != "tanh")
    throw std::invalid_argument("mlp: activation must be relu or tanh");
  if (!(dropout_ >= 0.0 && dropout_ < 1.0))
    throw std::invalid_argument("mlp: dropout must be in [0, 1)");
  if (batch_size < 1 || batch_ > data_.n)
    throw std::invalid_argument("mlp: need 1 <= batch_size <= n_samples");
  n_params_ = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
    n_params_ += static_cast<std::size_t>(widths_[l + 1]) * widths_[l] + widths_[l + 1];
}

double TinyMlp::batch_eval(std::span<const double> params, std::size_t begin, std::size_t end,
                           bool use_dropout, std::uint64_t mask_seed,
                           std::vector<double>* grad) const {
  if (params.size() != n_params_) throw std::invalid_argument("mlp: bad parameter shape");
  const std::size_t n_layers = widths_.size() - 1;
  const bool relu = activation_ == "relu";
  const bool dropping = use_dropout && dropout_ > 0.0;
  const double keep = 1.0 - dropout_;
  const double count = static_cast<double>(end - begin);

  // Per-layer parameter offsets into the flat vector.
  std::vector<std::size_t> w_off(n_layers), b_off(n_layers);
  {
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      w_off[l] = off;
      off += static_cast<std::size_t>(widths_[l + 1]) * widths_[l];
      b_off[l] = off;
      off += static_cast<std::size_t>(widths_[l + 1]);
    }
  }

  if (grad) grad->assign(n_params_, 0.0);

  // Per-sample work buffers, reused across the batch.
  std::vector<std::vector<double>> acts(n_layers + 1);   // post-activation (and post-dropout)
  std::vector<std::vector<double>> preacts(n_layers);    // z values
  std::vector<std::vector<double>> masks(n_layers);      // dropout scale per hidden unit
  std::vector<std::vector<double>> deltas(n_layers + 1);
  for (std::size_t l = 0; l <= n_layers; ++l) {
    acts[l].resize(static_cast<std::size_t>(widths_[l]));
    deltas[l].resize(static_cast<std::size_t>(widths_[l]));
    if (l < n_layers) preacts[l].resize(static_cast<std::size_t>(widths_[l + 1]));
    if (l < n_layers) masks[l].resize(static_cast<std::size_t>(widths_[l + 1]));
  }

  double loss = 0.0;
  std::vector<double> probs;
  for (std::size_t i = begin; i < end; ++i) {
    auto x = data_.row(i);
    std::copy(x.begin(), x.end(), acts[0].begin());

    SplitMix64 mask_rng(mix_seed(mix_seed(seed_, mask_seed), i));

    // Forward.
    for (std::size_t l = 0; l < n_layers; ++l) {
      const int out_w = widths_[l + 1];
      const int in_w = widths_[l];
      const double* W = params.data() + w_off[l];
      const double* b = params.data() + b_off[l];
      for (int r = 0; r < out_w; ++r) {
        double z = b[r];
        const double* w_row = W + static_cast<std::size_t>(r) * in_w;
        for (int cidx = 0; cidx < in_w; ++cidx) z += w_row[cidx] * acts[l][cidx];
        preacts[l][r] = z;
        if (l + 1 < n_layers) {
          double a = relu ? std::max(z, 0.0) : std::tanh(z);
          if (dropping) {
            const double m = mask_rng.uniform() < dropout_ ? 0.0 : 1.0 / keep;
            masks[l][r] = m;
            a *= m;
          }
          acts[l + 1][r] = a;
        } else {
          acts[l + 1][r] = z;  // logits
        }
      }
    }

    // Softmax cross-entropy.
    const auto& logits = acts[n_layers];
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double zsum = 0.0;
    probs.resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
      probs[k] = std::exp(logits[k] - zmax);
      zsum += probs[k];
    }
    for (double& p : probs) p /= zsum;
    const int y = data_.labels[i];
    loss += -(logits[static_cast<std::size_t>(y)] - zmax - std::log(zsum));

    if (!grad) continue;

    // Backward.
    for (std::size_t k = 0; k < probs.size(); ++k)
      deltas[n_layers][k] = (probs[k] - (static_cast<int>(k) == y ? 1.0 : 0.0)) / count;
    for (std::size_t l = n_layers; l-- > 0;) {
      const int out_w = widths_[l + 1];
      const int in_w = widths_[l];
      double* gW = grad->data() + w_off[l];
      double* gb = grad->data() + b_off[l];
      const double* W = params.data() + w_off[l];
      for (int r = 0; r < out_w; ++r) {
        const double d = deltas[l + 1][r];
        gb[r] += d;
        double* gw_row = gW + static_cast<std::size_t>(r) * in_w;
        for (int cidx = 0; cidx < in_w; ++cidx) gw_row[cidx] += d * acts[l][cidx];
      }
      if (l == 0) break;
      for (int cidx = 0; cidx < in_w; ++cidx) {
        double d = 0.0;
        for (int r = 0; r < out_w; ++r)
          d += W[static_cast<std::size_t>(r) * in_w + cidx] * deltas[l + 1][r];
        if (dropping) d *= masks[l - 1][cidx];
        const double z = preacts[l - 1][cidx];
        d *= relu ? (z > 0.0 ? 1.0 : 0.0) : (1.0 - std::tanh(z) * std::tanh(z));
        deltas[l][cidx] = d;
      }
    }
  }
  return loss / count;
}

double TinyMlp::eval(std::span<const double> params, std::uint64_t seed,
                     std::vector<double>& grad) const {
  const std::size_t block = seed % num_batches();
  const std::size_t begin = block * batch_;
  return batch_eval(params, begin, begin + batch_, true, seed, &grad);
}

double TinyMlp::full_loss(std::span<const double> params) const {
  return batch_eval(params, 0, data_.n, false, 0, nullptr);
}

void TinyMlp::full_gradient(std::span<const double> params, std::vector<double>& grad) const {
  batch_eval(params, 0, data_.n, false, 0, &grad);
}

std::vector<double> TinyMlp::initial_params(std::uint64_t seed) const {
  SplitMix64 rng(mix_seed(seed, 0x91017));
  std::vector<double> params(n_params_, 0.0);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int fan_in = widths_[l];
    const int fan_out = widths_[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (int k = 0; k < fan_out * fan_in; ++k) params[off++] = rng.uniform(-bound, bound);
    off += static_cast<std::size_t>(fan_out);  // biases stay zero
  }
  return params;
}

void TinyMlp::forward_probs(std::span<const double> params, std::span<const double> input,
                            std::vector<double>& probs) const {
  if (params.size() != n_params_) throw std::invalid_argument("mlp: bad parameter shape");
  if (input.size() != data_.dim) throw std::invalid_argument("mlp: bad input shape");
  const std::size_t n_layers = widths_.size() - 1;
  const bool relu = activation_ == "relu";
  std::vector<double> a(input.begin(), input.end());
  std::vector<double> next;
  std::size_t off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int out_w = widths_[l + 1];
    const int in_w = widths_[l];
    const double* W = params.data() + off;
    const double* b = params.data() + off + static_cast<std::size_t>(out_w) * in_w;
    next.assign(static_cast<std::size_t>(out_w), 0.0);
    for (int r = 0; r < out_w; ++r) {
      double z = b[r];
      for (int cidx = 0; cidx < in_w; ++cidx)
        z += W[static_cast<std::size_t>(r) * in_w + cidx] * a[static_cast<std::size_t>(cidx)];
      next[static_cast<std::size_t>(r)] =
          (l + 1 < n_layers) ? (relu ? std::max(z, 0.0) : std::tanh(z)) : z;
    }
    a.swap(next);
    off += static_cast<std::size_t>(out_w) * in_w + out_w;
  }
  const double zmax = *std::max_element(a.begin(), a.end());
  double zsum = 0.0;
  probs.resize(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    probs[k] = std::exp(a[k] - zmax);
    zsum += probs[k];
  }
  for (double& p : probs) p /= zsum;
}

}  // namespace cprop
