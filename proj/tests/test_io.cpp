#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cprop/config.hpp"
#include "cprop/record_io.hpp"
#include "cprop/svg.hpp"
#include "support.hpp"

using namespace cprop;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.problem.kind = "noisy_quadratic";
  cfg.problem.dim = 5;
  cfg.problem.kappa = 20.0;
  cfg.problem.noise = 0.3;
  OptimizerSpec opt;
  opt.base.kind = OptimizerKind::Sgd;
  opt.base.lr = 0.05;
  opt.scaling = ScalingKind::CProp;
  cfg.optimizers = {opt};
  cfg.seeds = {0, 1};
  cfg.iterations = 60;
  cfg.log_interval = 20;
  return cfg;
}

}  // namespace

TEST_CASE("format_float uses 9 significant digits") {
  CHECK(format_float(1.0) == "1");
  CHECK(format_float(0.1) == "0.1");
  CHECK(format_float(123456789.123) == "123456789");
  CHECK(format_float(1.0 / 3.0) == "0.333333333");
  CHECK(format_float(2.5e-11) == "2.5e-11");
}

TEST_CASE("run CSV round-trips byte-identically") {
  const fs::path dir = scratch_dir("cprop_io_csv");
  ExperimentConfig cfg = small_config();
  const auto recs = run_experiment(cfg);

  const fs::path first = dir / "run.csv";
  write_run_csv(first, recs[0]);
  const std::string bytes1 = slurp(first);
  CHECK(bytes1.starts_with("iter,loss,mean_scale,hist_0"));
  CHECK(bytes1.find('\r') == std::string::npos);  // LF endings only

  const RunRecord parsed = read_run_csv(first);
  REQUIRE(parsed.points.size() == recs[0].points.size());
  const fs::path second = dir / "run2.csv";
  write_run_csv(second, parsed);
  CHECK(slurp(second) == bytes1);

  // Same config + seed twice: byte-identical output.
  const auto recs2 = run_experiment(cfg);
  const fs::path third = dir / "run3.csv";
  write_run_csv(third, recs2[0]);
  CHECK(slurp(third) == bytes1);
  fs::remove_all(dir);
}

TEST_CASE("read_run_csv rejects malformed files") {
  const fs::path dir = scratch_dir("cprop_io_bad");
  {
    std::ofstream out(dir / "bad_header.csv", std::ios::binary);
    out << "iteration,loss\n0,1\n";
  }
  CHECK_THROWS_AS(read_run_csv(dir / "bad_header.csv"), std::runtime_error);
  {
    std::ofstream out(dir / "short_row.csv", std::ios::binary);
    out << "iter,loss,mean_scale";
    for (int b = 0; b < kScaleHistBins; ++b) out << ",hist_" << b;
    out << "\n0,1.5\n";
  }
  CHECK_THROWS_AS(read_run_csv(dir / "short_row.csv"), std::runtime_error);
  CHECK_THROWS_AS(read_run_csv(dir / "missing.csv"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("sidecar JSON embeds the resolved config and summary") {
  const fs::path dir = scratch_dir("cprop_io_json");
  ExperimentConfig cfg = small_config();
  const auto recs = run_experiment(cfg);
  const fs::path path = dir / "run.json";
  write_run_sidecar(path, cfg, cfg.optimizers[0], recs[1]);

  const nlohmann::json j = nlohmann::json::parse(slurp(path));
  CHECK(j["config"]["problem"]["kind"] == "noisy_quadratic");
  CHECK(j["config"]["problem"]["kappa"] == 20.0);
  CHECK(j["config"]["optimizer"]["kind"] == "sgd");
  CHECK(j["config"]["optimizer"]["scaling"] == "cprop");
  CHECK(j["config"]["optimizer"]["label"] == "cprop-sgd");
  CHECK(j["config"]["optimizer"]["beta"] == 0.999);
  CHECK(j["config"]["run"]["iterations"] == 60);
  CHECK(j["config"]["run"]["seed"] == 1);
  CHECK(j["summary"]["diverged"] == false);
  CHECK(j["summary"]["final_iter"] == 60);
  CHECK(j["summary"].contains("final_loss"));
  fs::remove_all(dir);
}

TEST_CASE("sidecar records divergence") {
  const fs::path dir = scratch_dir("cprop_io_div");
  ExperimentConfig cfg = small_config();
  cfg.optimizers[0].scaling = ScalingKind::None;
  cfg.optimizers[0].base.lr = 50.0;
  const auto recs = run_experiment(cfg);
  REQUIRE(recs[0].diverged);
  const fs::path path = dir / "div.json";
  write_run_sidecar(path, cfg, cfg.optimizers[0], recs[0]);
  const nlohmann::json j = nlohmann::json::parse(slurp(path));
  CHECK(j["summary"]["diverged"] == true);
  CHECK(j["summary"]["diverged_at"].get<long>() > 0);
  fs::remove_all(dir);
}

TEST_CASE("run_file_stem format") {
  ExperimentConfig cfg = small_config();
  CHECK(run_file_stem(cfg.problem, cfg.optimizers[0], 3) == "noisy_quadratic_cprop-sgd_0.05_3");
  cfg.optimizers[0].scaling = ScalingKind::None;
  cfg.optimizers[0].base.lr = 1e-4;
  CHECK(run_file_stem(cfg.problem, cfg.optimizers[0], 0) == "noisy_quadratic_sgd_0.0001_0");
}

TEST_CASE("aggregate_runs computes seed means and sample stds") {
  RunRecord a, b, c;
  a.seed = 0;
  b.seed = 1;
  c.seed = 2;
  for (long iter : {0L, 10L}) {
    LogPoint p;
    p.iter = iter;
    a.points.push_back(p);
    b.points.push_back(p);
    c.points.push_back(p);
  }
  a.points[1].loss = 1.0;
  b.points[1].loss = 2.0;
  c.points[1].loss = 4.0;
  a.points[1].mean_scale = 0.5;
  b.points[1].mean_scale = 0.7;
  c.points[1].mean_scale = 0.9;

  const auto rows = aggregate_runs("sgd", {a, b, c});
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].iter == 10);
  CHECK(rows[1].loss_mean == doctest::Approx(7.0 / 3.0));
  // Bessel-corrected sample std over {1, 2, 4}.
  const double mean = 7.0 / 3.0;
  const double expected_std = std::sqrt(((1 - mean) * (1 - mean) + (2 - mean) * (2 - mean) +
                                         (4 - mean) * (4 - mean)) /
                                        2.0);
  CHECK(rows[1].loss_std == doctest::Approx(expected_std).epsilon(1e-12));
  CHECK(rows[1].scale_mean == doctest::Approx(0.7));

  // Single record: std defined as 0.
  const auto single = aggregate_runs("sgd", {a});
  CHECK(single[1].loss_std == 0.0);
}

TEST_CASE("compare CSV layout") {
  const fs::path dir = scratch_dir("cprop_io_cmp");
  std::vector<CompareRow> rows;
  for (const char* name : {"sgd", "cprop-sgd"})
    for (long iter : {0L, 10L, 20L}) {
      CompareRow r;
      r.optimizer = name;
      r.iter = iter;
      r.loss_mean = 1.5;
      r.loss_std = 0.25;
      r.scale_mean = 0.5;
      rows.push_back(r);
    }
  const fs::path path = dir / "cmp.csv";
  write_compare_csv(path, rows);
  const std::string text = slurp(path);
  CHECK(text.starts_with("optimizer,iter,loss_mean,loss_std,scale_mean\n"));
  // header + 2 optimizers x 3 log points
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);
  CHECK(text.find("cprop-sgd,10,1.5,0.25,0.5\n") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("SVG output is well-formed XML with the fixed viewBox") {
  const fs::path dir = scratch_dir("cprop_io_svg");
  SvgSeries s1;
  s1.label = "sgd <test> & co";
  for (int i = 0; i <= 20; ++i) {
    s1.x.push_back(i);
    s1.y.push_back(std::exp(-0.1 * i) * 5.0 + 0.1);
    s1.y_lo.push_back(s1.y.back() * 0.9);
    s1.y_hi.push_back(s1.y.back() * 1.1);
  }
  SvgSeries s2;
  s2.label = "cprop-sgd";
  for (int i = 0; i <= 20; ++i) {
    s2.x.push_back(i);
    s2.y.push_back(std::exp(-0.2 * i) * 5.0 + 0.05);
  }

  const fs::path linear = dir / "chart.svg";
  write_line_chart_svg(linear, "loss", "iteration", "training loss", {s1, s2}, false);
  const std::string text = slurp(linear);
  CHECK(text.starts_with("<?xml"));
  CHECK(text.find("viewBox=\"0 0 800 500\"") != std::string::npos);
  CHECK(text.find("<polyline") != std::string::npos);
  CHECK(text.find("<polygon") != std::string::npos);
  CHECK(text.find("&lt;test&gt; &amp; co") != std::string::npos);
  CHECK(testsup::xml_well_formed(text));

  const fs::path log_path = dir / "chart_log.svg";
  write_line_chart_svg(log_path, "loss", "iteration", "training loss", {s1, s2}, true);
  CHECK(testsup::xml_well_formed(slurp(log_path)));

  CHECK_THROWS_AS(write_line_chart_svg(dir / "none.svg", "x", "x", "y", {}, false),
                  std::invalid_argument);
  fs::remove_all(dir);
}

TEST_CASE("config parsing: full round trip of the documented keys") {
  const std::string text = R"(# experiment
[problem]
kind = mlp
dim = 2
n_samples = 96        # dataset size
dataset = blobs
classes = 3
margin = 4.0
widths = 2,16,3
activation = tanh
dropout = 0.1
data_seed = 17

[optimizer]
kind = adam
lr = 0.003
scaling = cprop
beta = 0.995
c = 2
epsilon = 1e-9
beta1 = 0.85

[optimizer]
kind = sgd
lr = 0.1
label = plain

[run]
iters = 500
seeds = 3,4,5
log_interval = 25
batch_size = 32
clip_norm = 0.25
lr_budget = 100
lr_guess = 0.03
)";
  const ExperimentConfig cfg = parse_config(text);
  CHECK(cfg.problem.kind == "mlp");
  CHECK(cfg.problem.widths == std::vector<int>{2, 16, 3});
  CHECK(cfg.problem.dropout == 0.1);
  CHECK(cfg.problem.activation == "tanh");
  REQUIRE(cfg.optimizers.size() == 2);
  CHECK(cfg.optimizers[0].base.kind == OptimizerKind::Adam);
  CHECK(cfg.optimizers[0].base.lr == 0.003);
  CHECK(cfg.optimizers[0].base.beta1 == 0.85);
  CHECK(cfg.optimizers[0].scaling == ScalingKind::CProp);
  CHECK(cfg.optimizers[0].conf.beta == 0.995);
  CHECK(cfg.optimizers[0].conf.c == 2.0);
  CHECK(cfg.optimizers[0].label() == "cprop-adam");
  CHECK(cfg.optimizers[1].label() == "plain");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4, 5});
  CHECK(cfg.iterations == 500);
  CHECK(cfg.clip_norm == 0.25);
  CHECK(cfg.batch_size == 32);
  CHECK(cfg.lr_budget == 100);
  CHECK(cfg.lr_guess == 0.03);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config parsing reports line numbers") {
  const std::string bad = "[problem]\nkind = rosenbrock\nwhat = 3\n";
  try {
    parse_config(bad, "test.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("test.cfg:3") != std::string::npos);
    CHECK(std::string(e.what()).find("what") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_config("[problem]\ndim = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[weird]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("dim = 3\n"), ConfigError);        // key before any section
  CHECK_THROWS_AS(parse_config("[problem\nkind = x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[problem]\nkind =\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[optimizer]\nkind = adamw\n"), ConfigError);
}

TEST_CASE("config defaults and overrides") {
  const ExperimentConfig cfg = parse_config("[problem]\nkind = rosenbrock\ndim = 4\n");
  CHECK(cfg.optimizers.size() == 1);
  CHECK(cfg.optimizers[0].base.kind == OptimizerKind::Sgd);
  CHECK(cfg.optimizers[0].conf.beta == 0.999);
  CHECK(cfg.optimizers[0].conf.c == 1.0);
  CHECK(cfg.optimizers[0].conf.epsilon == 1e-8);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(cfg.batch_size == 32);

  ExperimentConfig cfg2 = cfg;
  apply_override(cfg2, "lr", "0.5");
  apply_override(cfg2, "iters", "77");
  apply_override(cfg2, "seed", "9");
  CHECK(cfg2.optimizers[0].base.lr == 0.5);
  CHECK(cfg2.iterations == 77);
  CHECK(cfg2.seeds == std::vector<std::uint64_t>{9});
  CHECK_THROWS_AS(apply_override(cfg2, "foo", "1"), ConfigError);
}

TEST_CASE("config sections can come in any order") {
  const ExperimentConfig cfg = parse_config(
      "[run]\niters = 42\n[optimizer]\nkind = rmsprop\n[problem]\nkind = rosenbrock\ndim = 3\n");
  CHECK(cfg.iterations == 42);
  CHECK(cfg.optimizers[0].base.kind == OptimizerKind::RmsProp);
  CHECK(cfg.problem.dim == 3);
}

TEST_CASE("load_config_file") {
  const fs::path dir = scratch_dir("cprop_io_cfg");
  const fs::path path = dir / "exp.cfg";
  {
    std::ofstream out(path, std::ios::binary);
    out << "[problem]\nkind = rosenbrock\ndim = 6\n[run]\niters = 10\n";
  }
  const ExperimentConfig cfg = load_config_file(path);
  CHECK(cfg.problem.dim == 6);
  CHECK(cfg.iterations == 10);
  CHECK_THROWS_AS(load_config_file(dir / "missing.cfg"), ConfigError);
  fs::remove_all(dir);
}
