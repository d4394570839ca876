#pragma once

#include <span>
#include <string>
#include <vector>

#include "cprop/conformity.hpp"

// Base first-order optimizers plus the scaling wrappers: CProp and the
// two alternative heuristics (relative rate, moment rate). Every base
// update is expressed as a direction vector that already includes the
// -lr factor, so a wrapper only multiplies it elementwise by a scale
// in [0,1] before applying it to the parameters.

namespace cprop {

enum class OptimizerKind { Sgd, Adam, RmsProp, AmsGrad, AdaBound };

enum class ScalingKind { None, CProp, RelativeRate, MomentRate };

OptimizerKind optimizer_kind_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);
ScalingKind scaling_kind_from_string(const std::string& name);
std::string to_string(ScalingKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double lr = 0.1;
  double beta1 = 0.9;     // Adam/AMSGrad/AdaBound first-moment decay
  double beta2 = 0.999;   // second-moment decay; also AdaBound's bound speed
  double alpha = 0.99;    // RMSProp squared-gradient decay
  double epsilon = 1e-8;
  double final_lr = 0.1;  // AdaBound final learning rate (shared with SGD's)

  void validate() const;
};

// Per-parameter buffers; which ones are live depends on the variant.
// SGD keeps none, Adam/AMSGrad/AdaBound keep m/v (+ v_max for AMSGrad),
// RMSProp keeps sq.
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::vector<double> v_max;
  std::vector<double> sq;
  long t = 0;

  OptimizerState() = default;
  OptimizerState(std::size_t dim, OptimizerKind kind);
};

// Advances the state and writes the update direction (including the
// -lr factor) into `dir`. Applying `params += dir` is exactly the
// textbook update for the variant.
void base_direction(OptimizerState& state, std::span<const double> g, const OptimizerConfig& cfg,
                    std::vector<double>& dir);

// params += dir. When dir_out is non-null the direction is copied there.
void base_step(OptimizerState& state, std::vector<double>& params, std::span<const double> g,
               const OptimizerConfig& cfg, std::vector<double>* dir_out = nullptr);

// params += s .* dir where s = cprop_step_scale(moments, g, cprop_cfg).
// Returns the scale used for this step.
std::vector<double> cprop_step(OptimizerState& state, GradientMoments& moments,
                               std::vector<double>& params, std::span<const double> g,
                               const OptimizerConfig& opt_cfg, const ConformityConfig& cprop_cfg);

// Relative-rate heuristic state: EMAs of g and |g| under one beta.
struct RateState {
  std::vector<double> num;
  std::vector<double> den;
  long t = 0;

  RateState() = default;
  explicit RateState(std::size_t dim) : num(dim, 0.0), den(dim, 0.0) {}
};

// scale = min(c*|num_hat|/(den_hat + eps), 1) with bias-corrected EMAs.
std::vector<double> relative_rate_scale(RateState& state, std::span<const double> g,
                                        const ConformityConfig& cfg);

// scale = min(c*|m_hat|/(sqrt(v_hat) + eps), 1).
std::vector<double> moment_rate_scale(GradientMoments& state, std::span<const double> g,
                                      const ConformityConfig& cfg);

// One optimizer instance for a training run: a base optimizer plus an
// optional scaling rule. Keeps the last step's scale and direction
// around for logging and for the wrapper-shrink checks.
class ScaledOptimizer {
 public:
  ScaledOptimizer(std::size_t dim, OptimizerConfig base, ScalingKind scaling,
                  ConformityConfig conf);

  void step(std::vector<double>& params, std::span<const double> g);

  // Scale applied on the most recent step; all ones before the first
  // step and for unscaled optimizers.
  const std::vector<double>& last_scale() const { return scale_; }

  // Base direction of the most recent step (the -lr-included update the
  // unwrapped optimizer would have taken from the same state).
  const std::vector<double>& last_direction() const { return dir_; }

  ScalingKind scaling() const { return scaling_; }
  const OptimizerConfig& base_config() const { return base_; }

 private:
  OptimizerConfig base_;
  ScalingKind scaling_;
  ConformityConfig conf_;
  OptimizerState state_;
  GradientMoments moments_;
  RateState rate_;
  std::vector<double> scale_;
  std::vector<double> dir_;
};

}  // namespace cprop
