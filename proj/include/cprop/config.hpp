#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "cprop/harness.hpp"

// Flat key-value experiment configs with [problem] / [optimizer] / [run]
// sections. Repeating [optimizer] adds another spec (used by the
// compare subcommand). '#' starts a comment. Errors carry line numbers.

namespace cprop {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");

ExperimentConfig load_config_file(const std::filesystem::path& path);

// key=value override applied after parsing: lr, iters, seed.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace cprop
