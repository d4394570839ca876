#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Gradient-history statistics and the conformity scale: a per-parameter
// score in [0,1] measuring how confidently the recent gradient history
// shows a consistent sign. The pipeline is
//
//   update_moments -> bias_correct -> effective_count -> std_error
//     -> sign_confidence -> conformity_scale
//
// composed end to end by cprop_step_scale(). The scale multiplies any
// base optimizer's update direction elementwise; see optim.hpp.
//
// GradientMoments is single-writer (one update per step); instances may
// move between threads between steps. The free functions are reentrant.

namespace cprop {

struct ConformityConfig {
  double beta = 0.999;    // gradient horizon, in [0, 1)
  double c = 1.0;         // overconfidence coefficient, > 0
  double epsilon = 1e-8;  // numerical floor, > 0

  // Throws std::invalid_argument if any field is out of range.
  void validate() const;
};

// Per-parameter EMA state: m tracks gradients, v tracks squared gradients,
// t counts completed updates. Fresh state is all zeros with t = 0.
struct GradientMoments {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;

  GradientMoments() = default;
  explicit GradientMoments(std::size_t dim) : m(dim, 0.0), v(dim, 0.0) {}

  std::size_t size() const { return m.size(); }
};

// Error function shared by every scale computation. Routed through a
// single implementation hook so the CDF path and the closed-form path
// can never disagree on erf; the selftest uses the hook to inject a
// corrupted erf and prove the suite catches it.
double erf(double x);

namespace detail {
extern double (*erf_impl)(double);
double erf_default(double x);
}  // namespace detail

// CDF of Normal(mean, stddev) evaluated at x.
double normal_cdf(double x, double mean, double stddev);

// p_neg = Phi(0; m_hat, sigma) for one coordinate. Computed so that
// negating m_hat yields exactly 1 - p_neg: the distance |p_neg - 0.5|
// is quantized once, on one grid, for either sign. This is what makes
// the conformity scale bitwise invariant under trace negation.
double sign_confidence_scalar(double m_hat, double sigma);

// m' = beta*m + (1-beta)*g, v' = beta*v + (1-beta)*g^2, t' = t + 1.
void update_moments(GradientMoments& state, std::span<const double> g, double beta);

// m_hat = m/(1-beta^t), v_hat = v/(1-beta^t). Requires t >= 1.
void bias_correct(const GradientMoments& state, double beta, std::vector<double>& m_hat,
                  std::vector<double>& v_hat);

// N_t = (1-beta^t)/(1-beta), the EMA's equivalent sample count. Grows
// from 1 at t = 1 toward 1/(1-beta). Requires t >= 1.
double effective_count(long t, double beta);

// sigma = sqrt(max(v_hat - m_hat^2, 0)/(n - 1 + eps)) + eps, elementwise.
// The max() clamp guards cancellation; every output is >= eps.
void std_error(std::span<const double> m_hat, std::span<const double> v_hat, double n,
               double epsilon, std::vector<double>& sigma);

// p_neg = Phi(0; m_hat, sigma): probability mass of the mean-gradient
// distribution below zero.
void sign_confidence(std::span<const double> m_hat, std::span<const double> sigma,
                     std::vector<double>& p_neg);

// s = min(2*c*|p_neg - 0.5|, 1), elementwise.
void conformity_scale(std::span<const double> p_neg, double c, std::vector<double>& s);

// Algebraically identical route s = min(c*erf(|m_hat|/(sigma*sqrt(2))), 1),
// kept as an independent expression of the same quantity for cross-checks.
void conformity_scale_closed_form(std::span<const double> m_hat, std::span<const double> sigma,
                                  double c, std::vector<double>& s);

// Advances the moment state by one gradient and returns the scale for
// this step. Composes the full pipeline above.
std::vector<double> cprop_step_scale(GradientMoments& state, std::span<const double> g,
                                     const ConformityConfig& cfg);

}  // namespace cprop
