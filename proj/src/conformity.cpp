#include "cprop/conformity.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cprop {

namespace detail {

// Odd-symmetric by construction: erf(-x) == -erf(x) bitwise, whatever
// the platform libm does with signs.
double erf_default(double x) {
  const double a = std::erf(std::fabs(x));
  return std::signbit(x) ? -a : a;
}

double (*erf_impl)(double) = &erf_default;

}  // namespace detail

double erf(double x) { return detail::erf_impl(x); }

double normal_cdf(double x, double mean, double stddev) {
  return 0.5 * (1.0 + cprop::erf((x - mean) / (stddev * std::sqrt(2.0))));
}

double sign_confidence_scalar(double m_hat, double sigma) {
  const double z = m_hat / (sigma * std::sqrt(2.0));
  const double half_e = 0.5 * cprop::erf(std::abs(z));
  const double d = (0.5 + half_e) - 0.5;
  return z > 0.0 ? 0.5 - d : 0.5 + d;
}

void ConformityConfig::validate() const {
  if (!(beta >= 0.0 && beta < 1.0))
    throw std::invalid_argument("ConformityConfig: beta must be in [0, 1), got " +
                                std::to_string(beta));
  if (!(c > 0.0))
    throw std::invalid_argument("ConformityConfig: c must be > 0, got " + std::to_string(c));
  if (!(epsilon > 0.0))
    throw std::invalid_argument("ConformityConfig: epsilon must be > 0, got " +
                                std::to_string(epsilon));
}

static void check_shape(std::size_t state_size, std::size_t g_size) {
  if (state_size != g_size)
    throw std::invalid_argument("gradient shape mismatch: state has " +
                                std::to_string(state_size) + " elements, gradient has " +
                                std::to_string(g_size));
}

void update_moments(GradientMoments& state, std::span<const double> g, double beta) {
  check_shape(state.size(), g.size());
  if (!(beta >= 0.0 && beta < 1.0))
    throw std::invalid_argument("update_moments: beta must be in [0, 1)");
  for (std::size_t i = 0; i < g.size(); ++i) {
    state.m[i] = beta * state.m[i] + (1.0 - beta) * g[i];
    state.v[i] = beta * state.v[i] + (1.0 - beta) * g[i] * g[i];
  }
  state.t += 1;
}

void bias_correct(const GradientMoments& state, double beta, std::vector<double>& m_hat,
                  std::vector<double>& v_hat) {
  if (state.t < 1) throw std::invalid_argument("bias_correct: requires t >= 1");
  const double corr = 1.0 - std::pow(beta, static_cast<double>(state.t));
  m_hat.resize(state.size());
  v_hat.resize(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    m_hat[i] = state.m[i] / corr;
    v_hat[i] = state.v[i] / corr;
  }
}

double effective_count(long t, double beta) {
  if (t < 1) throw std::invalid_argument("effective_count: requires t >= 1");
  return (1.0 - std::pow(beta, static_cast<double>(t))) / (1.0 - beta);
}

void std_error(std::span<const double> m_hat, std::span<const double> v_hat, double n,
               double epsilon, std::vector<double>& sigma) {
  check_shape(m_hat.size(), v_hat.size());
  sigma.resize(m_hat.size());
  const double denom = n - 1.0 + epsilon;
  for (std::size_t i = 0; i < m_hat.size(); ++i) {
    const double var = std::max(v_hat[i] - m_hat[i] * m_hat[i], 0.0);
    sigma[i] = std::sqrt(var / denom) + epsilon;
  }
}

void sign_confidence(std::span<const double> m_hat, std::span<const double> sigma,
                     std::vector<double>& p_neg) {
  check_shape(m_hat.size(), sigma.size());
  p_neg.resize(m_hat.size());
  for (std::size_t i = 0; i < m_hat.size(); ++i)
    p_neg[i] = sign_confidence_scalar(m_hat[i], sigma[i]);
}

void conformity_scale(std::span<const double> p_neg, double c, std::vector<double>& s) {
  s.resize(p_neg.size());
  for (std::size_t i = 0; i < p_neg.size(); ++i)
    s[i] = std::min(2.0 * c * std::abs(p_neg[i] - 0.5), 1.0);
}

void conformity_scale_closed_form(std::span<const double> m_hat, std::span<const double> sigma,
                                  double c, std::vector<double>& s) {
  check_shape(m_hat.size(), sigma.size());
  s.resize(m_hat.size());
  for (std::size_t i = 0; i < m_hat.size(); ++i) {
    const double z = m_hat[i] / (sigma[i] * std::sqrt(2.0));
    s[i] = std::min(c * cprop::erf(std::abs(z)), 1.0);
  }
}

std::vector<double> cprop_step_scale(GradientMoments& state, std::span<const double> g,
                                     const ConformityConfig& cfg) {
  cfg.validate();
  update_moments(state, g, cfg.beta);
  std::vector<double> m_hat, v_hat, sigma, p_neg, s;
  bias_correct(state, cfg.beta, m_hat, v_hat);
  const double n = effective_count(state.t, cfg.beta);
  std_error(m_hat, v_hat, n, cfg.epsilon, sigma);
  sign_confidence(m_hat, sigma, p_neg);
  conformity_scale(p_neg, cfg.c, s);
  return s;
}

}  // namespace cprop
