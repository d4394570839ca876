#include "cprop/record_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cprop {

std::string format_float(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

namespace {

// Round-trippable rendering for derived statistics (merged CSV).
std::string format_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::string run_file_stem(const ProblemSpec& problem, const OptimizerSpec& opt,
                          std::uint64_t seed) {
  std::ostringstream stem;
  stem << problem.kind << "_" << opt.label() << "_" << format_float(opt.base.lr) << "_" << seed;
  return stem.str();
}

void write_run_csv(const std::filesystem::path& path, const RunRecord& rec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iter,loss,mean_scale";
  for (int b = 0; b < kScaleHistBins; ++b) out << ",hist_" << b;
  out << "\n";
  for (const LogPoint& p : rec.points) {
    out << p.iter << "," << format_float(p.loss) << "," << format_float(p.mean_scale);
    for (long h : p.hist) out << "," << h;
    out << "\n";
  }
}

RunRecord read_run_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path.string());
  {
    std::ostringstream expected;
    expected << "iter,loss,mean_scale";
    for (int b = 0; b < kScaleHistBins; ++b) expected << ",hist_" << b;
    if (line != expected.str())
      throw std::runtime_error("unexpected CSV header in " + path.string());
  }
  RunRecord rec;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    LogPoint p;
    auto next_cell = [&]() {
      if (!std::getline(row, cell, ','))
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": too few columns");
      return cell;
    };
    p.iter = std::stol(next_cell());
    p.loss = std::stod(next_cell());
    p.mean_scale = std::stod(next_cell());
    for (int b = 0; b < kScaleHistBins; ++b)
      p.hist[static_cast<std::size_t>(b)] = std::stol(next_cell());
    rec.points.push_back(p);
  }
  return rec;
}

namespace {

nlohmann::json problem_json(const ProblemSpec& p) {
  nlohmann::json j{{"kind", p.kind}, {"dim", p.dim}, {"data_seed", p.data_seed}};
  if (p.kind == "noisy_quadratic") {
    j["kappa"] = p.kappa;
    j["noise"] = p.noise;
  } else if (p.kind == "logistic") {
    j["n_samples"] = p.n_samples;
    j["margin"] = p.margin;
  } else if (p.kind == "mlp") {
    j["n_samples"] = p.n_samples;
    j["dataset"] = p.dataset;
    j["widths"] = p.widths;
    j["activation"] = p.activation;
    j["dropout"] = p.dropout;
    j["classes"] = p.classes;
    if (p.dataset == "spirals") j["spiral_noise"] = p.spiral_noise;
    else j["margin"] = p.margin;
  }
  return j;
}

nlohmann::json optimizer_json(const OptimizerSpec& o) {
  nlohmann::json j{{"kind", to_string(o.base.kind)},
                   {"lr", o.base.lr},
                   {"scaling", to_string(o.scaling)},
                   {"label", o.label()}};
  switch (o.base.kind) {
    case OptimizerKind::Sgd:
      break;
    case OptimizerKind::Adam:
    case OptimizerKind::AmsGrad:
      j["beta1"] = o.base.beta1;
      j["beta2"] = o.base.beta2;
      j["base_epsilon"] = o.base.epsilon;
      break;
    case OptimizerKind::RmsProp:
      j["alpha"] = o.base.alpha;
      j["base_epsilon"] = o.base.epsilon;
      break;
    case OptimizerKind::AdaBound:
      j["beta1"] = o.base.beta1;
      j["beta2"] = o.base.beta2;
      j["base_epsilon"] = o.base.epsilon;
      j["final_lr"] = o.base.final_lr;
      break;
  }
  if (o.scaling != ScalingKind::None) {
    j["beta"] = o.conf.beta;
    j["c"] = o.conf.c;
    j["epsilon"] = o.conf.epsilon;
  }
  return j;
}

}  // namespace

void write_run_sidecar(const std::filesystem::path& path, const ExperimentConfig& cfg,
                       const OptimizerSpec& opt, const RunRecord& rec) {
  nlohmann::json j;
  j["config"]["problem"] = problem_json(cfg.problem);
  j["config"]["optimizer"] = optimizer_json(opt);
  j["config"]["run"] = {{"iterations", cfg.iterations},
                        {"log_interval", cfg.log_interval},
                        {"batch_size", cfg.batch_size},
                        {"seed", rec.seed}};
  if (cfg.clip_norm > 0.0) j["config"]["run"]["clip_norm"] = cfg.clip_norm;

  double min_loss = std::numeric_limits<double>::infinity();
  for (const LogPoint& p : rec.points) min_loss = std::min(min_loss, p.loss);
  nlohmann::json summary{{"seed", rec.seed},
                         {"diverged", rec.diverged},
                         {"points", rec.points.size()}};
  if (rec.diverged) summary["diverged_at"] = rec.diverged_at;
  if (!rec.points.empty()) {
    summary["initial_loss"] = rec.initial_loss();
    summary["final_loss"] = rec.final_loss();
    summary["min_loss"] = min_loss;
    summary["final_mean_scale"] = rec.points.back().mean_scale;
    summary["final_iter"] = rec.points.back().iter;
  }
  j["summary"] = summary;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<CompareRow> aggregate_runs(const std::string& label,
                                       const std::vector<RunRecord>& records) {
  // iter -> (losses over seeds, scale means over seeds)
  std::map<long, std::pair<std::vector<double>, std::vector<double>>> by_iter;
  for (const RunRecord& rec : records)
    for (const LogPoint& p : rec.points) {
      by_iter[p.iter].first.push_back(p.loss);
      by_iter[p.iter].second.push_back(p.mean_scale);
    }

  std::vector<CompareRow> rows;
  rows.reserve(by_iter.size());
  for (const auto& [iter, data] : by_iter) {
    const auto& losses = data.first;
    const auto& scales = data.second;
    CompareRow row;
    row.optimizer = label;
    row.iter = iter;
    double sum = 0.0;
    for (double l : losses) sum += l;
    row.loss_mean = sum / static_cast<double>(losses.size());
    if (losses.size() > 1) {
      double sq = 0.0;
      for (double l : losses) sq += (l - row.loss_mean) * (l - row.loss_mean);
      row.loss_std = std::sqrt(sq / static_cast<double>(losses.size() - 1));
    }
    double ssum = 0.0;
    for (double s : scales) ssum += s;
    row.scale_mean = ssum / static_cast<double>(scales.size());
    rows.push_back(row);
  }
  return rows;
}

void write_compare_csv(const std::filesystem::path& path, const std::vector<CompareRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "optimizer,iter,loss_mean,loss_std,scale_mean\n";
  for (const CompareRow& r : rows)
    out << r.optimizer << "," << r.iter << "," << format_full(r.loss_mean) << ","
        << format_full(r.loss_std) << "," << format_full(r.scale_mean) << "\n";
}

}  // namespace cprop
