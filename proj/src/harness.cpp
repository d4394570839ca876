#include "cprop/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cprop/rng.hpp"

namespace cprop {

std::unique_ptr<Problem> build_problem(const ProblemSpec& spec, int batch_size) {
  if (spec.kind == "noisy_quadratic")
    return std::make_unique<NoisyQuadratic>(spec.dim, spec.kappa, spec.noise);
  if (spec.kind == "rosenbrock") return std::make_unique<Rosenbrock>(spec.dim);
  if (spec.kind == "logistic")
    return std::make_unique<SyntheticLogistic>(spec.n_samples, spec.dim, spec.margin,
                                               spec.data_seed, batch_size);
  if (spec.kind == "mlp") {
    SyntheticDataset data =
        spec.dataset == "spirals"
            ? two_spirals(spec.n_samples, spec.spiral_noise, spec.data_seed)
            : gaussian_blobs(spec.n_samples, spec.dim, spec.classes, spec.margin, spec.data_seed);
    std::vector<int> widths = spec.widths;
    if (widths.empty())
      widths = {static_cast<int>(data.dim), 16, data.num_classes};
    return std::make_unique<TinyMlp>(std::move(widths), spec.activation, std::move(data),
                                     spec.data_seed, spec.dropout, batch_size);
  }
  throw std::invalid_argument("unknown problem kind: " + spec.kind);
}

std::string OptimizerSpec::label() const {
  if (!name.empty()) return name;
  if (scaling == ScalingKind::None) return to_string(base.kind);
  return to_string(scaling) + "-" + to_string(base.kind);
}

void ExperimentConfig::validate() const {
  if (optimizers.empty()) throw std::invalid_argument("config: need at least one optimizer");
  for (const auto& opt : optimizers) {
    opt.base.validate();
    opt.conf.validate();
  }
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
  if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
  if (log_interval < 1) throw std::invalid_argument("config: log_interval must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (clip_norm < 0.0) throw std::invalid_argument("config: clip_norm must be > 0 when set");
  if (lr_budget < 1) throw std::invalid_argument("config: lr_budget must be >= 1");
  if (!(lr_guess > 0.0)) throw std::invalid_argument("config: lr_guess must be > 0");
  build_problem(problem, batch_size);  // surfaces problem-spec errors early
}

std::array<long, kScaleHistBins> scale_histogram(std::span<const double> scale) {
  std::array<long, kScaleHistBins> hist{};
  for (double s : scale) {
    int bin = static_cast<int>(s * kScaleHistBins);
    bin = std::clamp(bin, 0, kScaleHistBins - 1);
    hist[static_cast<std::size_t>(bin)] += 1;
  }
  return hist;
}

void clip_gradient_norm(std::span<double> g, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradient_norm: max_norm must be > 0");
  double sq = 0.0;
  for (double gi : g) sq += gi * gi;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (double& gi : g) gi *= f;
  }
}

std::vector<double> smooth_series(std::span<const double> series, long window) {
  if (window < 1) throw std::invalid_argument("smooth_series: window must be >= 1");
  std::vector<double> out(series.begin(), series.end());
  if (out.empty() || window == 1) return out;
  const double a = 1.0 - 1.0 / static_cast<double>(window);
  for (std::size_t i = 1; i < out.size(); ++i) out[i] = a * out[i - 1] + (1.0 - a) * series[i];
  return out;
}

namespace {

LogPoint make_point(long iter, double loss, std::span<const double> scale) {
  LogPoint p;
  p.iter = iter;
  p.loss = loss;
  double sum = 0.0;
  for (double s : scale) sum += s;
  p.mean_scale = scale.empty() ? 0.0 : sum / static_cast<double>(scale.size());
  p.hist = scale_histogram(scale);
  return p;
}

}  // namespace

RunRecord run_single(const ExperimentConfig& cfg, const Problem& problem, std::uint64_t seed) {
  if (cfg.optimizers.empty()) throw std::invalid_argument("run_single: no optimizer spec");
  if (cfg.iterations < 0) throw std::invalid_argument("run_single: iterations must be >= 0");
  const OptimizerSpec& spec = cfg.optimizers.front();

  RunRecord rec;
  rec.seed = seed;

  std::vector<double> params = problem.initial_params(seed);
  ScaledOptimizer opt(params.size(), spec.base, spec.scaling, spec.conf);

  const double initial_loss = problem.full_loss(params);
  rec.points.push_back(make_point(0, initial_loss, opt.last_scale()));
  const double blowup = 1e6 * initial_loss;

  std::vector<double> grad;
  for (long t = 1; t <= cfg.iterations; ++t) {
    const double batch_loss = problem.eval(params, mix_seed(seed, static_cast<std::uint64_t>(t)),
                                           grad);
    if (!std::isfinite(batch_loss) || batch_loss > blowup) {
      rec.diverged = true;
      rec.diverged_at = t;
      break;
    }
    if (cfg.clip_norm > 0.0) clip_gradient_norm(grad, cfg.clip_norm);
    opt.step(params, grad);
    if (t % cfg.log_interval == 0 || t == cfg.iterations) {
      const double loss = problem.full_loss(params);
      if (!std::isfinite(loss) || loss > blowup) {
        rec.diverged = true;
        rec.diverged_at = t;
        break;
      }
      rec.points.push_back(make_point(t, loss, opt.last_scale()));
    }
  }
  return rec;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  auto problem = build_problem(cfg.problem, cfg.batch_size);
  std::vector<RunRecord> records;
  records.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) records.push_back(run_single(cfg, *problem, seed));
  return records;
}

namespace {

// Final training loss of one candidate; +inf when the run diverges.
double candidate_loss(const Problem& problem, OptimizerSpec opt, double lr, long budget,
                      std::uint64_t seed, double clip_norm) {
  opt.base.lr = lr;
  ExperimentConfig cfg;
  cfg.optimizers = {opt};
  cfg.iterations = budget;
  cfg.log_interval = budget;  // log only start and end
  cfg.clip_norm = clip_norm;
  RunRecord rec = run_single(cfg, problem, seed);
  if (rec.diverged || rec.points.empty() || rec.points.back().iter != budget)
    return std::numeric_limits<double>::infinity();
  return rec.points.back().loss;
}

}  // namespace

LrSearchResult lr_search(const Problem& problem, const OptimizerSpec& opt, long budget,
                         double guess_lo, double guess_hi, std::uint64_t seed, double clip_norm,
                         std::size_t cap) {
  if (budget < 1) throw std::invalid_argument("lr_search: budget must be >= 1");
  if (!(guess_lo > 0.0) || !(guess_hi > 0.0))
    throw std::invalid_argument("lr_search: guesses must be > 0");
  if (guess_lo > guess_hi) std::swap(guess_lo, guess_hi);
  if (std::abs(guess_hi / guess_lo - 3.0) > 1e-9 * 3.0)
    throw std::invalid_argument("lr_search: initial guesses must differ by a factor of 3");
  if (cap < 2) throw std::invalid_argument("lr_search: cap must be >= 2");

  LrSearchResult res;
  res.ladder = {guess_lo, guess_hi};
  res.losses = {candidate_loss(problem, opt, guess_lo, budget, seed, clip_norm),
                candidate_loss(problem, opt, guess_hi, budget, seed, clip_norm)};

  while (true) {
    // Ties prefer the smaller rate; the ladder is kept ascending.
    std::size_t best = 0;
    for (std::size_t i = 1; i < res.ladder.size(); ++i)
      if (res.losses[i] < res.losses[best]) best = i;

    if (best > 0 && best + 1 < res.ladder.size()) {
      res.interior = true;
      res.best_lr = res.ladder[best];
      return res;
    }
    if (res.ladder.size() >= cap) {
      if (std::all_of(res.losses.begin(), res.losses.end(),
                      [](double l) { return std::isinf(l); })) {
        std::ostringstream msg;
        msg << "lr_search: all candidates diverged:";
        for (double lr : res.ladder) msg << " " << lr;
        throw LrSearchError(msg.str());
      }
      res.best_lr = res.ladder[best];
      return res;
    }
    if (best == 0) {
      const double lr = res.ladder.front() / 3.0;
      res.ladder.insert(res.ladder.begin(), lr);
      res.losses.insert(res.losses.begin(),
                        candidate_loss(problem, opt, lr, budget, seed, clip_norm));
    } else {
      const double lr = res.ladder.back() * 3.0;
      res.ladder.push_back(lr);
      res.losses.push_back(candidate_loss(problem, opt, lr, budget, seed, clip_norm));
    }
  }
}

}  // namespace cprop
