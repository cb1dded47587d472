//
// Copyright 2026 The pidp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "pidp/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "pidp/errors.hpp"
#include "pidp/math.hpp"

namespace pidp {
namespace {

constexpr double kPi = 3.14159265358979323846;

GaussLegendreRule build_rule(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev initial guess, then Newton on P_n.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace

const GaussLegendreRule& gauss_legendre(int n) {
  if (n < 2) throw std::invalid_argument("need at least 2 nodes");
  static std::map<int, GaussLegendreRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
  return it->second;
}

double log_integrate(const std::function<double(double)>& log_f, double a,
                     double b, int panels, int nodes_per_panel) {
  if (!(b > a)) throw std::invalid_argument("empty integration interval");
  if (panels < 1) throw std::invalid_argument("need at least one panel");
  const GaussLegendreRule& rule = gauss_legendre(nodes_per_panel);
  const double h = (b - a) / panels;
  const double log_half_h = std::log(0.5 * h);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(panels) * rule.nodes.size());
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double x = mid + 0.5 * h * rule.nodes[j];
      terms.push_back(log_half_h + std::log(rule.weights[j]) + log_f(x));
    }
  }
  return log_sum_exp(terms);
}

double mixture_divergence_oracle(int alpha, double q, double delta_u,
                                 double sigma, const QuadratureSpec& spec) {
  if (alpha < 2) throw std::invalid_argument("alpha must be an integer >= 2");
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("q must lie in [0, 1]");
  if (!(delta_u >= 0.0))
    throw std::invalid_argument("delta_u must be nonnegative");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (spec.window_sigmas < 12.0)
    throw std::invalid_argument("window must cover at least 12 sigma");

  // P identical to Q: the divergence is 0 by definition.
  if (q == 0.0 || delta_u == 0.0) return 0.0;

  // Work with x in units of sigma; the divergence is scale invariant.
  const double d = delta_u / sigma;
  const double log_norm = -0.5 * std::log(2.0 * kPi);
  const double log_q = std::log(q);
  const double log_1mq = q < 1.0 ? std::log1p(-q) : kNegInf;

  // log of (q N(d,1) + (1-q) N(0,1))^alpha * N(0,1)^(1-alpha) at x.
  auto log_integrand = [&](double x) {
    const double log_g = log_norm - 0.5 * x * x;
    const double log_shift = log_norm - 0.5 * (x - d) * (x - d);
    const double log_f = log_sum_exp(log_q + log_shift, log_1mq + log_g);
    return alpha * log_f + (1.0 - alpha) * log_g;
  };

  // The alpha-power integrand has mass out to x ~ alpha*d.
  const double lo = -spec.window_sigmas;
  const double hi = alpha * d + spec.window_sigmas;
  const int base_panels = std::max(
      1, static_cast<int>(std::ceil((hi - lo) * spec.panels_per_sigma)));

  const double coarse =
      log_integrate(log_integrand, lo, hi, base_panels, spec.nodes_per_panel) /
      (alpha - 1.0);
  const double fine = log_integrate(log_integrand, lo, hi, 2 * base_panels,
                                    spec.nodes_per_panel) /
                      (alpha - 1.0);
  const double scale = std::max(std::abs(fine), 1.0);
  if (std::abs(fine - coarse) > spec.tolerance * scale) {
    throw NumericError(
        "mixture divergence quadrature did not converge: coarse=" +
        std::to_string(coarse) + " fine=" + std::to_string(fine));
  }
  return fine;
}

}  // namespace pidp
