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

#ifndef PIDP_QUADRATURE_HPP_
#define PIDP_QUADRATURE_HPP_

#include <functional>
#include <vector>

namespace pidp {

// Gauss-Legendre abscissas/weights on [-1, 1], computed by Newton iteration
// on the Legendre polynomial (cached per node count).
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussLegendreRule& gauss_legendre(int n);

struct QuadratureSpec {
  double window_sigmas = 15.0;  // half-window beyond the outermost mean
  int panels_per_sigma = 4;     // composite panels per unit of sigma
  int nodes_per_panel = 20;
  double tolerance = 1e-9;      // refinement agreement, relative
};

// ln of the integral of exp(log_f) over [a, b], composite Gauss-Legendre
// with `panels` panels; accumulation happens in log space so integrands
// whose values overflow double are fine.
double log_integrate(const std::function<double(double)>& log_f, double a,
                     double b, int panels, int nodes_per_panel);

// Numerical-quadrature value of
//   D_alpha( q N(delta_u, sigma^2) + (1-q) N(0, sigma^2) || N(0, sigma^2) )
// on a 1-D grid. Independent of the series in sgm_rdp_bound; used to
// validate it. The integration window spans the full mass of the
// alpha-power integrand (which peaks near alpha*delta_u), never less than
// window_sigmas around both means. Throws NumericError when doubling the
// panel count moves the result by more than the tolerance.
double mixture_divergence_oracle(int alpha, double q, double delta_u,
                                 double sigma,
                                 const QuadratureSpec& spec = {});

}  // namespace pidp

#endif  // PIDP_QUADRATURE_HPP_
