#include <doctest.h>

#include <cmath>
#include <vector>

#include "cprop/harness.hpp"
#include "cprop/rng.hpp"

using namespace cprop;

namespace {

ExperimentConfig quadratic_config() {
  ExperimentConfig cfg;
  cfg.problem.kind = "noisy_quadratic";
  cfg.problem.dim = 8;
  cfg.problem.kappa = 50.0;
  cfg.problem.noise = 0.0;
  OptimizerSpec opt;
  opt.base.kind = OptimizerKind::Sgd;
  opt.base.lr = 0.02;
  cfg.optimizers = {opt};
  cfg.seeds = {0};
  cfg.iterations = 200;
  cfg.log_interval = 10;
  return cfg;
}

}  // namespace

TEST_CASE("clip_gradient_norm") {
  std::vector<double> g{0.3, 0.4};
  clip_gradient_norm(g, 1.0);
  CHECK(g == std::vector<double>{0.3, 0.4});  // norm 0.5 <= 1: untouched

  std::vector<double> big{3.0, 4.0};
  clip_gradient_norm(big, 1.0);
  CHECK(big[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(big[1] == doctest::Approx(0.8).epsilon(1e-15));

  SplitMix64 rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> v(5);
    for (double& x : v) x = rng.normal(0, 3);
    double before = 0.0;
    for (double x : v) before += x * x;
    before = std::sqrt(before);
    const double max_norm = rng.uniform(0.1, 5.0);
    clip_gradient_norm(v, max_norm);
    double after = 0.0;
    for (double x : v) after += x * x;
    after = std::sqrt(after);
    CHECK(std::abs(after - std::min(before, max_norm)) <= 1e-12);
  }

  CHECK_THROWS_AS(clip_gradient_norm(g, 0.0), std::invalid_argument);
}

TEST_CASE("smooth_series") {
  std::vector<double> series{3.0, 1.0, 4.0, 1.0, 5.0};
  CHECK(smooth_series(series, 1) == series);

  std::vector<double> constant(40, 2.5);
  const auto smoothed = smooth_series(constant, 7);
  for (double v : smoothed) CHECK(v == doctest::Approx(2.5).epsilon(1e-14));

  // Step 0 -> 1: value after k steps of 1 is 1 - (1 - 1/w)^k.
  std::vector<double> step(30, 0.0);
  for (std::size_t i = 10; i < step.size(); ++i) step[i] = 1.0;
  const long w = 5;
  const auto s = smooth_series(step, w);
  for (std::size_t i = 10; i < step.size(); ++i) {
    const double k = static_cast<double>(i - 9);
    CHECK(s[i] == doctest::Approx(1.0 - std::pow(1.0 - 1.0 / w, k)).epsilon(1e-12));
  }

  CHECK_THROWS_AS(smooth_series(series, 0), std::invalid_argument);
  CHECK(smooth_series(std::vector<double>{}, 3).empty());
}

TEST_CASE("scale_histogram bins and totals") {
  std::vector<double> scale{0.0, 0.049, 0.05, 0.51, 0.999, 1.0};
  const auto hist = scale_histogram(scale);
  long total = 0;
  for (long h : hist) total += h;
  CHECK(total == 6);
  CHECK(hist[0] == 2);   // 0.0 and 0.049
  CHECK(hist[1] == 1);   // 0.05
  CHECK(hist[10] == 1);  // 0.51
  CHECK(hist[19] == 2);  // 0.999 and 1.0
}

TEST_CASE("run_single with zero iterations logs only the initial loss") {
  ExperimentConfig cfg = quadratic_config();
  cfg.iterations = 0;
  auto problem = build_problem(cfg.problem, cfg.batch_size);
  const RunRecord rec = run_single(cfg, *problem, 0);
  REQUIRE(rec.points.size() == 1);
  CHECK(rec.points[0].iter == 0);
  CHECK(rec.points[0].loss == doctest::Approx(problem->full_loss(problem->initial_params(0))));
  CHECK(!rec.diverged);
}

TEST_CASE("noiseless quadratic SGD below the stability threshold descends monotonically") {
  ExperimentConfig cfg = quadratic_config();  // lr 0.02 < 2/kappa = 0.04
  auto problem = build_problem(cfg.problem, cfg.batch_size);
  const RunRecord rec = run_single(cfg, *problem, 3);
  REQUIRE(rec.points.size() > 5);
  for (std::size_t i = 1; i < rec.points.size(); ++i)
    CHECK(rec.points[i].loss <= rec.points[i - 1].loss);
  CHECK(!rec.diverged);
}

TEST_CASE("identical config and seed give identical records") {
  ExperimentConfig cfg = quadratic_config();
  cfg.problem.noise = 0.5;
  cfg.optimizers[0].scaling = ScalingKind::CProp;
  auto problem = build_problem(cfg.problem, cfg.batch_size);
  const RunRecord a = run_single(cfg, *problem, 11);
  const RunRecord b = run_single(cfg, *problem, 11);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].iter == b.points[i].iter);
    CHECK(a.points[i].loss == b.points[i].loss);
    CHECK(a.points[i].mean_scale == b.points[i].mean_scale);
    CHECK(a.points[i].hist == b.points[i].hist);
  }
}

TEST_CASE("divergent runs abort with a status instead of crashing") {
  ExperimentConfig cfg = quadratic_config();
  cfg.optimizers[0].base.lr = 10.0;  // lr * kappa >> 2
  auto problem = build_problem(cfg.problem, cfg.batch_size);
  const RunRecord rec = run_single(cfg, *problem, 0);
  CHECK(rec.diverged);
  CHECK(rec.diverged_at > 0);
  for (const LogPoint& p : rec.points) CHECK(std::isfinite(p.loss));
}

TEST_CASE("logged mean scale equals the histogram mean within half a bin") {
  ExperimentConfig cfg = quadratic_config();
  cfg.problem.noise = 0.5;
  cfg.optimizers[0].scaling = ScalingKind::CProp;
  cfg.iterations = 400;
  auto problem = build_problem(cfg.problem, cfg.batch_size);
  const RunRecord rec = run_single(cfg, *problem, 1);
  for (const LogPoint& p : rec.points) {
    long total = 0;
    double hist_mean = 0.0;
    for (int b = 0; b < kScaleHistBins; ++b) {
      total += p.hist[static_cast<std::size_t>(b)];
      hist_mean += p.hist[static_cast<std::size_t>(b)] * ((b + 0.5) / kScaleHistBins);
    }
    CHECK(total == cfg.problem.dim);
    hist_mean /= static_cast<double>(total);
    CHECK(std::abs(hist_mean - p.mean_scale) <= 0.025 + 1e-9);
  }
}

TEST_CASE("run_experiment returns one record per seed") {
  ExperimentConfig cfg = quadratic_config();
  cfg.seeds = {4, 9, 2};
  const auto recs = run_experiment(cfg);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].seed == 4);
  CHECK(recs[1].seed == 9);
  CHECK(recs[2].seed == 2);
  CHECK(recs[0].final_loss() != recs[1].final_loss());
}

TEST_CASE("config validation catches bad fields") {
  ExperimentConfig cfg = quadratic_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.seeds.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = quadratic_config();
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = quadratic_config();
  cfg.clip_norm = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = quadratic_config();
  cfg.problem.kind = "nonesuch";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("gradient clipping changes the trajectory when active") {
  ExperimentConfig cfg = quadratic_config();
  cfg.problem.noise = 0.0;
  auto problem = build_problem(cfg.problem, cfg.batch_size);
  const RunRecord plain = run_single(cfg, *problem, 5);
  cfg.clip_norm = 0.25;
  const RunRecord clipped = run_single(cfg, *problem, 5);
  CHECK(plain.points.back().loss != clipped.points.back().loss);
  CHECK(!clipped.diverged);
}

TEST_CASE("lr_search finds an interior grid point on a smooth 1-D quadratic") {
  NoisyQuadratic problem(1, 1.0, 0.0);  // D = [1]
  OptimizerSpec opt;
  opt.base.kind = OptimizerKind::Sgd;
  const LrSearchResult res = lr_search(problem, opt, 100, 0.1, 0.3, 0, 0.0);
  CHECK(res.interior);
  // Best grid rate is on the x3 ladder through 0.1.
  const double k = std::log(res.best_lr / 0.1) / std::log(3.0);
  CHECK(std::abs(k - std::round(k)) <= 1e-9);
  // And it is the ladder entry with the smallest |1 - lr * D|.
  double best_r = 2.0, got_r = 0.0;
  for (double lr : res.ladder) best_r = std::min(best_r, std::abs(1.0 - lr));
  got_r = std::abs(1.0 - res.best_lr);
  CHECK(got_r == doctest::Approx(best_r));
}

TEST_CASE("lr_search rejects guesses that do not differ by 3x") {
  NoisyQuadratic problem(1, 1.0, 0.0);
  OptimizerSpec opt;
  CHECK_THROWS_AS(lr_search(problem, opt, 10, 0.1, 0.25, 0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(lr_search(problem, opt, 0, 0.1, 0.3, 0, 0.0), std::invalid_argument);
}

TEST_CASE("lr_search reports when every candidate diverges") {
  Rosenbrock problem(4);
  OptimizerSpec opt;
  opt.base.kind = OptimizerKind::Sgd;
  // Even the lowest rung of a 12-entry ladder from 1e8 diverges.
  CHECK_THROWS_AS(lr_search(problem, opt, 50, 1e8, 3e8, 0, 0.0), LrSearchError);
}

TEST_CASE("lr_search walks down from diverging guesses") {
  NoisyQuadratic problem(1, 1.0, 0.0);
  OptimizerSpec opt;
  opt.base.kind = OptimizerKind::Sgd;
  const LrSearchResult res = lr_search(problem, opt, 60, 81.0, 243.0, 0, 0.0);
  CHECK(res.interior);
  CHECK(res.best_lr < 3.0);  // walked down into the stable region
  CHECK(std::isinf(res.losses.back()));
}
