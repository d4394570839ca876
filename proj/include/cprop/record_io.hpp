#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cprop/harness.hpp"

// RunRecord persistence. One CSV per run:
//
//   iter,loss,mean_scale,hist_0,...,hist_19
//
// header row, LF line endings, floats printed with 9 significant
// digits; plus a JSON sidecar carrying the resolved config and summary
// stats. File stem: {problem}_{optimizer}_{lr}_{seed}.

namespace cprop {

// Formats a double with 9 significant digits (%.9g).
std::string format_float(double x);

std::string run_file_stem(const ProblemSpec& problem, const OptimizerSpec& opt,
                          std::uint64_t seed);

void write_run_csv(const std::filesystem::path& path, const RunRecord& rec);

// Reads back the documented CSV format; only the logged points survive
// a round trip (seed and divergence live in the sidecar). Throws
// std::runtime_error on malformed input.
RunRecord read_run_csv(const std::filesystem::path& path);

void write_run_sidecar(const std::filesystem::path& path, const ExperimentConfig& cfg,
                       const OptimizerSpec& opt, const RunRecord& rec);

// Per-optimizer loss statistics over seeds at each logged iteration.
struct CompareRow {
  std::string optimizer;
  long iter = 0;
  double loss_mean = 0.0;
  double loss_std = 0.0;  // sample std over seeds (0 for a single seed)
  double scale_mean = 0.0;
};

// Aggregates aligned log points over seeds; records that diverged early
// contribute only the points they reached.
std::vector<CompareRow> aggregate_runs(const std::string& label,
                                       const std::vector<RunRecord>& records);

// Merged CSV: optimizer,iter,loss_mean,loss_std,scale_mean; one row per
// (optimizer, logged iteration).
void write_compare_csv(const std::filesystem::path& path, const std::vector<CompareRow>& rows);

}  // namespace cprop
