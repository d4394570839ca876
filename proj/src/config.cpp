#include "cprop/config.hpp"

#include <fstream>
#include <sstream>

namespace cprop {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& origin, int line, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    fail(origin, line, "expected a number, got '" + value + "'");
  }
}

long parse_long(const std::string& origin, int line, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    fail(origin, line, "expected an integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& origin, int line, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    fail(origin, line, "expected a nonnegative integer, got '" + value + "'");
  }
}

std::vector<std::string> split_commas(const std::string& value) {
  std::vector<std::string> parts;
  std::istringstream in(value);
  std::string part;
  while (std::getline(in, part, ',')) parts.push_back(trim(part));
  return parts;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  cfg.seeds.clear();

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  bool seen_optimizer = false;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section == "optimizer") {
        cfg.optimizers.emplace_back();
        seen_optimizer = true;
      } else if (section != "problem" && section != "run") {
        fail(origin, line_no, "unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, line_no, "empty key");
    if (value.empty()) fail(origin, line_no, "empty value for '" + key + "'");

    if (section == "problem") {
      ProblemSpec& p = cfg.problem;
      if (key == "kind") p.kind = value;
      else if (key == "dim") p.dim = static_cast<int>(parse_long(origin, line_no, value));
      else if (key == "kappa") p.kappa = parse_double(origin, line_no, value);
      else if (key == "noise") p.noise = parse_double(origin, line_no, value);
      else if (key == "n_samples") p.n_samples = static_cast<int>(parse_long(origin, line_no, value));
      else if (key == "margin") p.margin = parse_double(origin, line_no, value);
      else if (key == "data_seed") p.data_seed = parse_u64(origin, line_no, value);
      else if (key == "widths") {
        p.widths.clear();
        for (const std::string& w : split_commas(value))
          p.widths.push_back(static_cast<int>(parse_long(origin, line_no, w)));
      }
      else if (key == "activation") p.activation = value;
      else if (key == "dropout") p.dropout = parse_double(origin, line_no, value);
      else if (key == "classes") p.classes = static_cast<int>(parse_long(origin, line_no, value));
      else if (key == "dataset") p.dataset = value;
      else if (key == "spiral_noise") p.spiral_noise = parse_double(origin, line_no, value);
      else fail(origin, line_no, "unknown [problem] key '" + key + "'");
    } else if (section == "optimizer") {
      OptimizerSpec& o = cfg.optimizers.back();
      try {
        if (key == "kind") o.base.kind = optimizer_kind_from_string(value);
        else if (key == "lr") o.base.lr = parse_double(origin, line_no, value);
        else if (key == "scaling") o.scaling = scaling_kind_from_string(value);
        else if (key == "beta") o.conf.beta = parse_double(origin, line_no, value);
        else if (key == "c") o.conf.c = parse_double(origin, line_no, value);
        else if (key == "epsilon") o.conf.epsilon = parse_double(origin, line_no, value);
        else if (key == "beta1") o.base.beta1 = parse_double(origin, line_no, value);
        else if (key == "beta2") o.base.beta2 = parse_double(origin, line_no, value);
        else if (key == "alpha") o.base.alpha = parse_double(origin, line_no, value);
        else if (key == "base_epsilon") o.base.epsilon = parse_double(origin, line_no, value);
        else if (key == "final_lr") o.base.final_lr = parse_double(origin, line_no, value);
        else if (key == "label") o.name = value;
        else fail(origin, line_no, "unknown [optimizer] key '" + key + "'");
      } catch (const std::invalid_argument& e) {
        fail(origin, line_no, e.what());
      }
    } else if (section == "run") {
      if (key == "iters" || key == "iterations") cfg.iterations = parse_long(origin, line_no, value);
      else if (key == "seeds") {
        cfg.seeds.clear();
        for (const std::string& s : split_commas(value))
          cfg.seeds.push_back(parse_u64(origin, line_no, s));
      }
      else if (key == "log_interval") cfg.log_interval = parse_long(origin, line_no, value);
      else if (key == "clip_norm") cfg.clip_norm = parse_double(origin, line_no, value);
      else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_long(origin, line_no, value));
      else if (key == "lr_budget") cfg.lr_budget = parse_long(origin, line_no, value);
      else if (key == "lr_guess") cfg.lr_guess = parse_double(origin, line_no, value);
      else fail(origin, line_no, "unknown [run] key '" + key + "'");
    } else {
      fail(origin, line_no, "key '" + key + "' outside of any section");
    }
  }

  if (!seen_optimizer) cfg.optimizers.emplace_back();
  if (cfg.seeds.empty()) cfg.seeds = {0, 1, 2};
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const std::string origin = "<override " + key + ">";
  if (key == "lr") {
    const double lr = parse_double(origin, 1, value);
    for (OptimizerSpec& o : cfg.optimizers) o.base.lr = lr;
  } else if (key == "iters") {
    cfg.iterations = parse_long(origin, 1, value);
  } else if (key == "seed") {
    cfg.seeds = {parse_u64(origin, 1, value)};
  } else {
    throw ConfigError("unknown override '" + key + "'");
  }
}

}  // namespace cprop
