#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cprop/problems.hpp"

// Test-only oracles, independent of the library's computation paths:
// a long-double scalar re-derivation of the EMA conformity pipeline, a
// series/continued-fraction erf, finite differences, and a tiny XML
// well-formedness checker for the SVG output.

namespace testsup {

// erf via Maclaurin series for small |x| and the erfc continued
// fraction (modified Lentz) for large |x|, all in long double.
inline long double erf_reference(long double x) {
  const long double ax = std::fabs(x);
  const long double two_over_sqrt_pi = 1.1283791670955125738961589031215L;
  long double result;
  if (ax < 2.0L) {
    long double term = ax;
    long double sum = ax;
    for (int n = 1; n < 200; ++n) {
      term *= -ax * ax / n;
      const long double add = term / (2 * n + 1);
      sum += add;
      if (std::fabs(add) < 1e-22L * std::fabs(sum)) break;
    }
    result = two_over_sqrt_pi * sum;
  } else if (ax > 12.0L) {
    result = 1.0L;
  } else {
    // erfc(x) = exp(-x^2)/sqrt(pi) * K where K is the continued
    // fraction 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
    const long double tiny = 1e-30L;
    long double f = tiny, c_val = f, d = 0.0L;
    for (int n = 0; n < 300; ++n) {
      const long double a = n == 0 ? 1.0L : n / 2.0L;
      const long double b = ax;
      d = b + a * d;
      if (d == 0.0L) d = tiny;
      c_val = b + a / c_val;
      if (c_val == 0.0L) c_val = tiny;
      d = 1.0L / d;
      const long double delta = c_val * d;
      f *= delta;
      if (std::fabs(delta - 1.0L) < 1e-22L) break;
    }
    const long double erfc = std::exp(-ax * ax) / std::sqrt(3.14159265358979323846264338328L) * f;
    result = 1.0L - erfc;
  }
  return x < 0 ? -result : result;
}

// Scalar long-double walk of the whole conformity pipeline for one
// coordinate's trace. Mirrors the published update rules, not the
// library code.
struct ScalarPipelineOracle {
  long double m = 0.0L, v = 0.0L;
  long t = 0;

  struct Step {
    long double m_hat, v_hat, n, sigma, p_neg, scale;
  };

  Step step(long double g, long double beta, long double c, long double eps) {
    m = beta * m + (1.0L - beta) * g;
    v = beta * v + (1.0L - beta) * g * g;
    t += 1;
    const long double corr = 1.0L - std::pow(beta, static_cast<long double>(t));
    Step s;
    s.m_hat = m / corr;
    s.v_hat = v / corr;
    s.n = corr / (1.0L - beta);
    const long double var = std::max(s.v_hat - s.m_hat * s.m_hat, 0.0L);
    s.sigma = std::sqrt(var / (s.n - 1.0L + eps)) + eps;
    s.p_neg = 0.5L * (1.0L - erf_reference(s.m_hat / (s.sigma * std::sqrt(2.0L))));
    s.scale = std::min(2.0L * c * std::fabs(s.p_neg - 0.5L), 1.0L);
    return s;
  }
};

// Max normwise relative error between the problem's analytic gradient
// and central finite differences of its deterministic loss.
inline double fd_gradient_error(const cprop::Problem& problem, std::vector<double> params,
                                double h) {
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

// Same, for an arbitrary scalar function of the parameter vector.
inline double fd_error_fn(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> params, std::span<const double> analytic,
                          double h) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f(params);
    params[i] = saved - h;
    const double down = f(params);
    params[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    num += (fd - analytic[i]) * (fd - analytic[i]);
    den += analytic[i] * analytic[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

// Checks tag balance and the single root element of an XML document.
// Good enough to catch malformed SVG emission.
inline bool xml_well_formed(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  int roots = 0;
  while (i < text.size()) {
    if (text[i] != '<') { ++i; continue; }
    const std::size_t end = text.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    if (tag.front() == '?' || tag.front() == '!') continue;
    const bool closing = tag.front() == '/';
    const bool self_closing = tag.back() == '/';
    if (closing) tag = tag.substr(1);
    if (self_closing) tag = tag.substr(0, tag.size() - 1);
    const std::size_t space = tag.find_first_of(" \t\n");
    const std::string name = space == std::string::npos ? tag : tag.substr(0, space);
    if (name.empty()) return false;
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closing) {
      if (stack.empty()) ++roots;
      stack.push_back(name);
    } else if (stack.empty()) {
      ++roots;
    }
  }
  return stack.empty() && roots == 1;
}

}  // namespace testsup
