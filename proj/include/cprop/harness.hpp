#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cprop/optim.hpp"
#include "cprop/problems.hpp"

// Experimental protocol at desk scale: seeded training runs with
// scale-distribution logging, gradient-norm clipping, the factor-of-3
// learning-rate search, and series smoothing for plots.

namespace cprop {

struct ProblemSpec {
  std::string kind = "noisy_quadratic";  // noisy_quadratic | rosenbrock | logistic | mlp
  int dim = 20;
  double kappa = 100.0;          // noisy_quadratic: condition number
  double noise = 0.5;            // noisy_quadratic: gradient noise stddev
  int n_samples = 256;           // logistic / mlp dataset size
  double margin = 4.0;           // blob class-center separation
  std::uint64_t data_seed = 7;   // dataset generation seed
  std::vector<int> widths;       // mlp layer widths; empty = {dim, 16, classes}
  std::string activation = "relu";
  double dropout = 0.0;
  int classes = 3;               // mlp blob classes
  std::string dataset = "blobs";  // blobs | spirals
  double spiral_noise = 0.15;
};

std::unique_ptr<Problem> build_problem(const ProblemSpec& spec, int batch_size);

struct OptimizerSpec {
  OptimizerConfig base;
  ScalingKind scaling = ScalingKind::None;
  ConformityConfig conf;
  std::string name;  // optional custom label

  // "sgd", "cprop-adam", "relative-sgd", ... unless a custom name is set.
  std::string label() const;
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<OptimizerSpec> optimizers;  // run/lr-search use [0]; compare uses all
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  long iterations = 2000;
  long log_interval = 10;
  double clip_norm = 0.0;  // <= 0 disables clipping
  int batch_size = 32;
  long lr_budget = 500;    // lr-search iterations per candidate
  double lr_guess = 0.1;   // lr-search lower initial guess (paired with 3x)

  // Enforces the config invariants (iterations >= 1, seeds nonempty,
  // clip_norm > 0 when set, ...). The CLI calls this before any
  // computation; run_experiment itself also accepts iterations = 0.
  void validate() const;
};

inline constexpr int kScaleHistBins = 20;

struct LogPoint {
  long iter = 0;
  double loss = 0.0;
  double mean_scale = 1.0;
  std::array<long, kScaleHistBins> hist{};  // counts over [0,1]; sum = parameter count
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<LogPoint> points;
  bool diverged = false;
  long diverged_at = -1;

  double initial_loss() const { return points.empty() ? 0.0 : points.front().loss; }
  double final_loss() const { return points.empty() ? 0.0 : points.back().loss; }
};

// Scale histogram over [0,1]: 20 bins, s = 1 lands in the last bin.
std::array<long, kScaleHistBins> scale_histogram(std::span<const double> scale);

// If ||g||_2 > max_norm, rescales g to norm max_norm; otherwise leaves
// it alone. Requires max_norm > 0.
void clip_gradient_norm(std::span<double> g, double max_norm);

// Trailing EMA with coefficient 1 - 1/window, seeded at the first
// element; window = 1 is the identity. Output length = input length.
std::vector<double> smooth_series(std::span<const double> series, long window);

// One seeded training run with the config's first optimizer spec.
// Logs iteration 0 and then every log_interval-th step (plus the final
// step). A non-finite loss or loss > 1e6 x initial loss aborts the run
// with the diverged flag set instead of crashing.
RunRecord run_single(const ExperimentConfig& cfg, const Problem& problem, std::uint64_t seed);

// run_single for every seed in the config, in order.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

struct LrSearchResult {
  double best_lr = 0.0;
  std::vector<double> ladder;  // ascending candidates examined
  std::vector<double> losses;  // final losses aligned with ladder; +inf = diverged
  bool interior = false;       // best had both neighbors worse (ladder cap not hit)
};

struct LrSearchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Factor-of-3 ladder search: starts from two guesses differing by 3x,
// extends the ladder by x3 / /3 away from the current best until the
// best is interior or the ladder reaches `cap` entries. Every candidate
// runs the same seed for `budget` iterations and is judged by training
// loss at the last iteration; diverged candidates rank worst; ties
// prefer the smaller rate. Throws LrSearchError when every candidate
// diverges.
LrSearchResult lr_search(const Problem& problem, const OptimizerSpec& opt, long budget,
                         double guess_lo, double guess_hi, std::uint64_t seed,
                         double clip_norm = 0.0, std::size_t cap = 12);

}  // namespace cprop
