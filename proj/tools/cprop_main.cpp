#include <cmath>
#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cprop/config.hpp"
#include "cprop/harness.hpp"
#include "cprop/oracle.hpp"
#include "cprop/record_io.hpp"
#include "cprop/rng.hpp"
#include "cprop/svg.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;

fs::path default_out_dir() {
  if (const char* env = std::getenv("CPROP_OUT_DIR")) return fs::path(env);
  return fs::path("out");
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir = default_out_dir().string();
  double lr = 0.0;
  long iters = -1;
  long seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config = true) {
  auto* cfg = cmd->add_option("--config,-c", opts.config_path, "experiment config file");
  if (needs_config) cfg->required();
  cmd->add_option("--out,-o", opts.out_dir, "output directory (default $CPROP_OUT_DIR or ./out)");
  cmd->add_option("--lr", opts.lr, "override learning rate");
  cmd->add_option("--iters", opts.iters, "override iteration count");
  cmd->add_option("--seed", opts.seed, "override seeds with a single seed");
}

cprop::ExperimentConfig load_and_validate(const CommonOpts& opts) {
  cprop::ExperimentConfig cfg = cprop::load_config_file(opts.config_path);
  if (opts.lr > 0.0) cprop::apply_override(cfg, "lr", std::to_string(opts.lr));
  if (opts.iters >= 0) cprop::apply_override(cfg, "iters", std::to_string(opts.iters));
  if (opts.seed >= 0) cprop::apply_override(cfg, "seed", std::to_string(opts.seed));
  cfg.validate();
  return cfg;
}

// Writes the per-seed CSV + JSON pair for one optimizer spec.
void persist_records(const fs::path& out, const cprop::ExperimentConfig& cfg,
                     const cprop::OptimizerSpec& opt, const std::vector<cprop::RunRecord>& recs) {
  for (const cprop::RunRecord& rec : recs) {
    const std::string stem = cprop::run_file_stem(cfg.problem, opt, rec.seed);
    cprop::write_run_csv(out / (stem + ".csv"), rec);
    cprop::write_run_sidecar(out / (stem + ".json"), cfg, opt, rec);
  }
}

int cmd_run(const CommonOpts& opts) {
  cprop::ExperimentConfig cfg = load_and_validate(opts);
  const fs::path out(opts.out_dir);
  fs::create_directories(out);

  std::vector<cprop::RunRecord> recs = cprop::run_experiment(cfg);
  persist_records(out, cfg, cfg.optimizers.front(), recs);

  std::size_t diverged = 0;
  for (const cprop::RunRecord& rec : recs) {
    std::cout << cfg.problem.kind << " " << cfg.optimizers.front().label() << " seed " << rec.seed;
    if (rec.diverged) {
      std::cout << ": diverged at iteration " << rec.diverged_at << "\n";
      ++diverged;
    } else {
      std::cout << ": final loss " << cprop::format_float(rec.final_loss()) << "\n";
    }
  }
  std::cout << "wrote " << recs.size() << " run(s) to " << out.string() << "\n";
  return diverged == recs.size() ? kExitDiverged : kExitOk;
}

int cmd_lr_search(const CommonOpts& opts) {
  cprop::ExperimentConfig cfg = load_and_validate(opts);
  const fs::path out(opts.out_dir);
  fs::create_directories(out);

  auto problem = cprop::build_problem(cfg.problem, cfg.batch_size);
  // The rate is tuned for the base optimizer only; scaling wrappers
  // inherit whatever the base gets.
  cprop::OptimizerSpec opt = cfg.optimizers.front();
  if (opt.scaling != cprop::ScalingKind::None) {
    std::cout << "note: searching the base " << cprop::to_string(opt.base.kind)
              << " rate (scaling wrapper ignored during search)\n";
    opt.scaling = cprop::ScalingKind::None;
    opt.name.clear();
  }
  cprop::LrSearchResult res =
      cprop::lr_search(*problem, opt, cfg.lr_budget, cfg.lr_guess, cfg.lr_guess * 3.0,
                       cfg.seeds.front(), cfg.clip_norm);

  std::cout << "lr ladder (" << cfg.lr_budget << " iterations each):\n";
  for (std::size_t i = 0; i < res.ladder.size(); ++i)
    std::cout << "  lr " << cprop::format_float(res.ladder[i]) << " -> loss "
              << cprop::format_float(res.losses[i])
              << (res.ladder[i] == res.best_lr ? "  (best)" : "") << "\n";
  std::cout << "best lr: " << cprop::format_float(res.best_lr) << "\n";

  std::ofstream json(out / (cfg.problem.kind + "_" + opt.label() + "_lr_search.json"),
                     std::ios::binary);
  json << "{\n  \"best_lr\": " << cprop::format_float(res.best_lr) << ",\n  \"interior\": "
       << (res.interior ? "true" : "false") << ",\n  \"ladder\": [";
  for (std::size_t i = 0; i < res.ladder.size(); ++i)
    json << (i ? ", " : "") << cprop::format_float(res.ladder[i]);
  json << "],\n  \"losses\": [";
  for (std::size_t i = 0; i < res.losses.size(); ++i)
    json << (i ? ", " : "")
         << (std::isinf(res.losses[i]) ? std::string("\"diverged\"")
                                       : cprop::format_float(res.losses[i]));
  json << "]\n}\n";
  return kExitOk;
}

int cmd_compare(const CommonOpts& opts, long smooth_window, bool log_y) {
  cprop::ExperimentConfig cfg = load_and_validate(opts);
  if (cfg.optimizers.size() < 2)
    throw cprop::ConfigError("compare: config must list at least two [optimizer] sections");
  const fs::path out(opts.out_dir);
  fs::create_directories(out);

  std::vector<cprop::CompareRow> merged;
  std::vector<cprop::SvgSeries> series;
  auto problem = cprop::build_problem(cfg.problem, cfg.batch_size);
  for (const cprop::OptimizerSpec& opt : cfg.optimizers) {
    cprop::ExperimentConfig one = cfg;
    one.optimizers = {opt};
    std::vector<cprop::RunRecord> recs;
    recs.reserve(cfg.seeds.size());
    for (std::uint64_t seed : cfg.seeds) recs.push_back(cprop::run_single(one, *problem, seed));
    persist_records(out, cfg, opt, recs);

    // Aggregate from the round-tripped per-seed CSVs so the merged
    // stats are exactly reproducible from the persisted artifacts.
    std::vector<cprop::RunRecord> parsed;
    parsed.reserve(recs.size());
    for (const cprop::RunRecord& rec : recs)
      parsed.push_back(cprop::read_run_csv(
          out / (cprop::run_file_stem(cfg.problem, opt, rec.seed) + ".csv")));
    std::vector<cprop::CompareRow> rows = cprop::aggregate_runs(opt.label(), parsed);
    cprop::SvgSeries s;
    s.label = opt.label();
    for (const cprop::CompareRow& row : rows) {
      s.x.push_back(static_cast<double>(row.iter));
      s.y.push_back(row.loss_mean);
      s.y_lo.push_back(row.loss_mean - row.loss_std);
      s.y_hi.push_back(row.loss_mean + row.loss_std);
    }
    if (smooth_window > 1) {
      s.y = cprop::smooth_series(s.y, smooth_window);
      s.y_lo = cprop::smooth_series(s.y_lo, smooth_window);
      s.y_hi = cprop::smooth_series(s.y_hi, smooth_window);
    }
    series.push_back(std::move(s));
    merged.insert(merged.end(), rows.begin(), rows.end());
  }

  cprop::write_compare_csv(out / (cfg.problem.kind + "_compare.csv"), merged);
  cprop::write_line_chart_svg(out / (cfg.problem.kind + "_compare.svg"),
                              cfg.problem.kind + " training loss", "iteration", "training loss",
                              series, log_y);
  std::cout << "wrote " << (out / (cfg.problem.kind + "_compare.csv")).string() << " and .svg\n";
  return kExitOk;
}

int cmd_plot(const std::vector<std::string>& csv_paths, const std::string& out_file,
             long smooth_window, bool log_y) {
  std::vector<cprop::SvgSeries> series;
  for (const std::string& p : csv_paths) {
    cprop::RunRecord rec = cprop::read_run_csv(p);
    cprop::SvgSeries s;
    s.label = fs::path(p).stem().string();
    for (const cprop::LogPoint& pt : rec.points) {
      s.x.push_back(static_cast<double>(pt.iter));
      s.y.push_back(pt.loss);
    }
    if (smooth_window > 1) s.y = cprop::smooth_series(s.y, smooth_window);
    series.push_back(std::move(s));
  }
  cprop::write_line_chart_svg(out_file, "training loss", "iteration", "training loss", series,
                              log_y);
  std::cout << "wrote " << out_file << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// selftest: oracle-agreement and gradient-check suites
// ---------------------------------------------------------------------------

bool report(const std::string& name, bool ok, double detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << " (" << cprop::format_float(detail)
            << ")\n";
  return ok;
}

// Max normwise relative error between analytic and central-difference
// gradients of the problem's deterministic objective.
double fd_gradient_error(const cprop::Problem& problem, std::vector<double> params, double h) {
  std::vector<double> analytic;
  problem.full_gradient(params, analytic);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = problem.full_loss(params);
    params[i] = saved - h;
    const double down = problem.full_loss(params);
    params[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    num += (fd - analytic[i]) * (fd - analytic[i]);
    den += analytic[i] * analytic[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

int cmd_selftest() {
  bool all_ok = true;

  // erf against reference points.
  {
    const double refs[][2] = {{0.5, 0.5204998778130465}, {1.0, 0.8427007929497149},
                              {2.0, 0.9953222650189527}, {-1.5, -0.9661051464753107}};
    double worst = 0.0;
    for (const auto& r : refs) worst = std::max(worst, std::abs(cprop::erf(r[0]) - r[1]));
    all_ok &= report("erf reference points (abs err <= 1e-7)", worst <= 1e-7, worst);
  }

  // Conformity pipeline against the hand-expanded [1, -1] trace.
  {
    cprop::GradientMoments state(1);
    cprop::ConformityConfig conf{0.9, 1.0, 1e-8};
    cprop::cprop_step_scale(state, std::vector<double>{1.0}, conf);
    const double s = cprop::cprop_step_scale(state, std::vector<double>{-1.0}, conf)[0];
    const double err = std::abs(s - 0.039877611);
    all_ok &= report("conformity scale on [1,-1] trace", err < 1e-4, s);
  }

  // EMA scale vs exact-full-history and bootstrap oracles.
  {
    cprop::SplitMix64 rng(20260808);
    cprop::GradientTrace trace;
    cprop::GradientMoments state(1);
    cprop::ConformityConfig conf{0.999, 1.0, 1e-8};
    double ema_scale = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const double g = rng.normal(0.1, 1.0);
      trace.append(g);
      ema_scale = cprop::cprop_step_scale(state, std::vector<double>{g}, conf)[0];
    }
    const double exact = cprop::exact_full_history_scale(trace, 1e-8);
    const double boot = cprop::bootstrap_scale(trace, 10000, 99, 1.0);
    const double d1 = std::abs(ema_scale - exact);
    const double d2 = std::abs(ema_scale - boot);
    all_ok &= report("EMA vs exact-history scale (<= 0.05)", d1 <= 0.05, d1);
    all_ok &= report("EMA vs bootstrap scale (<= 0.05)", d2 <= 0.05, d2);
  }

  // Gradient checks.
  {
    cprop::NoisyQuadratic quad(10, 100.0, 0.0);
    const double e1 = fd_gradient_error(quad, quad.initial_params(3), 1e-5);
    all_ok &= report("noisy_quadratic gradient vs FD (<= 1e-6)", e1 <= 1e-6, e1);

    cprop::Rosenbrock rosen(6);
    const double e2 = fd_gradient_error(rosen, rosen.initial_params(3), 1e-5);
    all_ok &= report("rosenbrock gradient vs FD (<= 1e-6)", e2 <= 1e-6, e2);

    cprop::SyntheticLogistic logistic(128, 8, 4.0, 11, 32);
    std::vector<double> w(8);
    cprop::SplitMix64 rng(5);
    for (double& wi : w) wi = rng.normal(0.0, 0.5);
    const double e3 = fd_gradient_error(logistic, w, 1e-5);
    all_ok &= report("logistic gradient vs FD (<= 1e-6)", e3 <= 1e-6, e3);

    cprop::TinyMlp mlp({2, 24, 16, 3}, "tanh", cprop::gaussian_blobs(96, 2, 3, 4.0, 17), 17, 0.0,
                       32);
    const double e4 = fd_gradient_error(mlp, mlp.initial_params(3), 1e-5);
    all_ok &= report("mlp backprop vs FD (<= 1e-4)", e4 <= 1e-4, e4);
  }

  // Wrapper shrink on a short Rosenbrock run.
  {
    cprop::Rosenbrock rosen(4);
    std::vector<double> params = rosen.initial_params(0);
    cprop::OptimizerConfig base;
    base.lr = 1e-4;
    cprop::ScaledOptimizer opt(params.size(), base, cprop::ScalingKind::CProp,
                               cprop::ConformityConfig{});
    bool shrink_ok = true;
    std::vector<double> grad;
    for (int t = 1; t <= 200; ++t) {
      rosen.eval(params, 0, grad);
      opt.step(params, grad);
      for (std::size_t i = 0; i < params.size(); ++i)
        shrink_ok &= std::abs(opt.last_scale()[i] * opt.last_direction()[i]) <=
                     std::abs(opt.last_direction()[i]);
    }
    all_ok &= report("wrapper shrink |dtheta_cprop| <= |dtheta_base|", shrink_ok,
                     shrink_ok ? 1.0 : 0.0);
  }

  std::cout << (all_ok ? "selftest passed\n" : "selftest FAILED\n");
  return all_ok ? kExitOk : kExitConfig;
}

double corrupted_erf(double x) { return 0.9 * cprop::detail::erf_default(x); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CProp: conformity-scaled optimizers, desk-scale benchmark harness"};
  app.require_subcommand(1);

  CommonOpts run_opts, lr_opts, compare_opts;
  long compare_smooth = 1;
  bool compare_log_y = false;
  std::vector<std::string> plot_csvs;
  std::string plot_out = "plot.svg";
  long plot_smooth = 1;
  bool plot_log_y = false;
  bool corrupt_erf = false;

  CLI::App* run = app.add_subcommand("run", "run an experiment, one CSV+JSON per seed");
  add_common(run, run_opts);

  CLI::App* lrs = app.add_subcommand("lr-search", "factor-of-3 learning-rate search");
  add_common(lrs, lr_opts);

  CLI::App* cmp = app.add_subcommand("compare", "run several optimizers and plot paired curves");
  add_common(cmp, compare_opts);
  cmp->add_option("--smooth", compare_smooth, "smoothing window for plotted series");
  cmp->add_flag("--log-y", compare_log_y, "logarithmic y axis");

  CLI::App* plot_cmd = app.add_subcommand("plot", "plot existing run CSVs into one SVG");
  plot_cmd->add_option("--csv", plot_csvs, "run CSV files")->required()->expected(-1);
  plot_cmd->add_option("--out-file", plot_out, "output SVG path");
  plot_cmd->add_option("--smooth", plot_smooth, "smoothing window");
  plot_cmd->add_flag("--log-y", plot_log_y, "logarithmic y axis");

  CLI::App* self = app.add_subcommand("selftest", "oracle-agreement and gradient-check suites");
  self->add_flag("--corrupt-erf", corrupt_erf, "test hook: inject a broken erf")
      ->group("");  // hidden

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (lrs->parsed()) return cmd_lr_search(lr_opts);
    if (cmp->parsed()) return cmd_compare(compare_opts, compare_smooth, compare_log_y);
    if (plot_cmd->parsed()) return cmd_plot(plot_csvs, plot_out, plot_smooth, plot_log_y);
    if (self->parsed()) {
      if (corrupt_erf) cprop::detail::erf_impl = &corrupted_erf;
      return cmd_selftest();
    }
  } catch (const cprop::LrSearchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
