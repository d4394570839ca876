#include "cprop/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace cprop {

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "rmsprop") return OptimizerKind::RmsProp;
  if (name == "amsgrad") return OptimizerKind::AmsGrad;
  if (name == "adabound") return OptimizerKind::AdaBound;
  throw std::invalid_argument("unknown optimizer kind: " + name);
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::RmsProp: return "rmsprop";
    case OptimizerKind::AmsGrad: return "amsgrad";
    case OptimizerKind::AdaBound: return "adabound";
  }
  throw std::invalid_argument("unknown optimizer kind");
}

ScalingKind scaling_kind_from_string(const std::string& name) {
  if (name == "none") return ScalingKind::None;
  if (name == "cprop") return ScalingKind::CProp;
  if (name == "relative") return ScalingKind::RelativeRate;
  if (name == "moment") return ScalingKind::MomentRate;
  throw std::invalid_argument("unknown scaling kind: " + name);
}

std::string to_string(ScalingKind kind) {
  switch (kind) {
    case ScalingKind::None: return "none";
    case ScalingKind::CProp: return "cprop";
    case ScalingKind::RelativeRate: return "relative";
    case ScalingKind::MomentRate: return "moment";
  }
  throw std::invalid_argument("unknown scaling kind");
}

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("OptimizerConfig: lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0))
    throw std::invalid_argument("OptimizerConfig: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("OptimizerConfig: beta2 must be in [0, 1)");
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("OptimizerConfig: alpha must be in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("OptimizerConfig: epsilon must be > 0");
  if (!(final_lr > 0.0)) throw std::invalid_argument("OptimizerConfig: final_lr must be > 0");
}

OptimizerState::OptimizerState(std::size_t dim, OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd:
      break;
    case OptimizerKind::Adam:
    case OptimizerKind::AdaBound:
      m.assign(dim, 0.0);
      v.assign(dim, 0.0);
      break;
    case OptimizerKind::AmsGrad:
      m.assign(dim, 0.0);
      v.assign(dim, 0.0);
      v_max.assign(dim, 0.0);
      break;
    case OptimizerKind::RmsProp:
      sq.assign(dim, 0.0);
      break;
  }
}

void base_direction(OptimizerState& state, std::span<const double> g, const OptimizerConfig& cfg,
                    std::vector<double>& dir) {
  const std::size_t n = g.size();
  dir.resize(n);
  state.t += 1;
  const double t = static_cast<double>(state.t);

  switch (cfg.kind) {
    case OptimizerKind::Sgd: {
      for (std::size_t i = 0; i < n; ++i) dir[i] = -cfg.lr * g[i];
      break;
    }
    case OptimizerKind::Adam: {
      if (state.m.size() != n) throw std::invalid_argument("optimizer state shape mismatch");
      const double c1 = 1.0 - std::pow(cfg.beta1, t);
      const double c2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        dir[i] = -cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      }
      break;
    }
    case OptimizerKind::AmsGrad: {
      if (state.m.size() != n) throw std::invalid_argument("optimizer state shape mismatch");
      const double c1 = 1.0 - std::pow(cfg.beta1, t);
      const double c2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        state.v_max[i] = std::max(state.v_max[i], v_hat);
        dir[i] = -cfg.lr * m_hat / (std::sqrt(state.v_max[i]) + cfg.epsilon);
      }
      break;
    }
    case OptimizerKind::RmsProp: {
      if (state.sq.size() != n) throw std::invalid_argument("optimizer state shape mismatch");
      for (std::size_t i = 0; i < n; ++i) {
        state.sq[i] = cfg.alpha * state.sq[i] + (1.0 - cfg.alpha) * g[i] * g[i];
        dir[i] = -cfg.lr * g[i] / (std::sqrt(state.sq[i]) + cfg.epsilon);
      }
      break;
    }
    case OptimizerKind::AdaBound: {
      if (state.m.size() != n) throw std::invalid_argument("optimizer state shape mismatch");
      const double c1 = 1.0 - std::pow(cfg.beta1, t);
      const double c2 = 1.0 - std::pow(cfg.beta2, t);
      // Bound speed follows beta2; the bounds tighten around final_lr.
      const double lower = cfg.final_lr * (1.0 - 1.0 / (cfg.beta2 * t + 1.0));
      const double upper = cfg.final_lr * (1.0 + 1.0 / (cfg.beta2 * t));
      for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        double eta = cfg.lr / (std::sqrt(v_hat) + cfg.epsilon);
        eta = std::min(std::max(eta, lower), upper);
        dir[i] = -eta * m_hat;
      }
      break;
    }
  }
}

void base_step(OptimizerState& state, std::vector<double>& params, std::span<const double> g,
               const OptimizerConfig& cfg, std::vector<double>* dir_out) {
  if (params.size() != g.size()) throw std::invalid_argument("parameter/gradient shape mismatch");
  std::vector<double> dir;
  base_direction(state, g, cfg, dir);
  for (std::size_t i = 0; i < params.size(); ++i) params[i] += dir[i];
  if (dir_out) *dir_out = std::move(dir);
}

std::vector<double> cprop_step(OptimizerState& state, GradientMoments& moments,
                               std::vector<double>& params, std::span<const double> g,
                               const OptimizerConfig& opt_cfg,
                               const ConformityConfig& cprop_cfg) {
  if (params.size() != g.size()) throw std::invalid_argument("parameter/gradient shape mismatch");
  std::vector<double> s = cprop_step_scale(moments, g, cprop_cfg);
  std::vector<double> dir;
  base_direction(state, g, opt_cfg, dir);
  for (std::size_t i = 0; i < params.size(); ++i) params[i] += s[i] * dir[i];
  return s;
}

std::vector<double> relative_rate_scale(RateState& state, std::span<const double> g,
                                        const ConformityConfig& cfg) {
  if (state.num.size() != g.size())
    throw std::invalid_argument("rate state/gradient shape mismatch");
  state.t += 1;
  const double corr = 1.0 - std::pow(cfg.beta, static_cast<double>(state.t));
  std::vector<double> s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    state.num[i] = cfg.beta * state.num[i] + (1.0 - cfg.beta) * g[i];
    state.den[i] = cfg.beta * state.den[i] + (1.0 - cfg.beta) * std::abs(g[i]);
    const double num_hat = state.num[i] / corr;
    const double den_hat = state.den[i] / corr;
    s[i] = std::min(cfg.c * std::abs(num_hat) / (den_hat + cfg.epsilon), 1.0);
  }
  return s;
}

std::vector<double> moment_rate_scale(GradientMoments& state, std::span<const double> g,
                                      const ConformityConfig& cfg) {
  update_moments(state, g, cfg.beta);
  std::vector<double> m_hat, v_hat;
  bias_correct(state, cfg.beta, m_hat, v_hat);
  std::vector<double> s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    s[i] = std::min(cfg.c * std::abs(m_hat[i]) / (std::sqrt(v_hat[i]) + cfg.epsilon), 1.0);
  return s;
}

ScaledOptimizer::ScaledOptimizer(std::size_t dim, OptimizerConfig base, ScalingKind scaling,
                                 ConformityConfig conf)
    : base_(base),
      scaling_(scaling),
      conf_(conf),
      state_(dim, base.kind),
      scale_(dim, 1.0),
      dir_(dim, 0.0) {
  base_.validate();
  conf_.validate();
  if (scaling_ == ScalingKind::CProp || scaling_ == ScalingKind::MomentRate)
    moments_ = GradientMoments(dim);
  if (scaling_ == ScalingKind::RelativeRate) rate_ = RateState(dim);
}

void ScaledOptimizer::step(std::vector<double>& params, std::span<const double> g) {
  if (params.size() != scale_.size())
    throw std::invalid_argument("parameter/optimizer shape mismatch");
  switch (scaling_) {
    case ScalingKind::None:
      break;
    case ScalingKind::CProp:
      scale_ = cprop_step_scale(moments_, g, conf_);
      break;
    case ScalingKind::RelativeRate:
      scale_ = relative_rate_scale(rate_, g, conf_);
      break;
    case ScalingKind::MomentRate:
      scale_ = moment_rate_scale(moments_, g, conf_);
      break;
  }
  base_direction(state_, g, base_, dir_);
  if (scaling_ == ScalingKind::None) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += dir_[i];
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += scale_[i] * dir_[i];
  }
}

}  // namespace cprop
