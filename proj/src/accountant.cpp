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

#include "pidp/accountant.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pidp/math.hpp"

namespace pidp {

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::kXToXprime:
      return "x_to_xprime";
    case Direction::kXprimeToX:
      return "xprime_to_x";
    case Direction::kMax:
      return "max";
  }
  return "max";
}

void MechanismParams::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("q must lie in [0, 1]");
  if (!(clip > 0.0)) throw std::invalid_argument("clip must be positive");
  if (!(normalizer >= 1.0))
    throw std::invalid_argument("normalizer must be >= 1");
}

int ceil_order(double alpha) {
  if (!(alpha > 1.0)) throw std::invalid_argument("order must exceed 1");
  const double c = std::ceil(alpha);
  return static_cast<int>(c < 2.0 ? 2.0 : c);
}

RenyiOrder RenyiOrder::from(double alpha) {
  return RenyiOrder{alpha, ceil_order(alpha)};
}

double sgm_rdp_bound(int alpha, double q, double delta_u, double sigma) {
  if (alpha < 2) throw std::invalid_argument("alpha must be an integer >= 2");
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("q must lie in [0, 1]");
  if (!(delta_u >= 0.0))
    throw std::invalid_argument("delta_u must be nonnegative");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");

  // delta_u = 0 turns the sum into a binomial expansion of 1; both it and
  // q = 0 are exact-zero branches (and q = 1 the pure Gaussian) so the
  // log-gamma path never smears these identities.
  if (q == 0.0 || delta_u == 0.0) return 0.0;
  const double s2 = 2.0 * sigma * sigma;
  if (q == 1.0) return alpha * delta_u * delta_u / s2;

  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  std::vector<double> terms(static_cast<std::size_t>(alpha) + 1);
  for (int k = 0; k <= alpha; ++k) {
    const double kk = static_cast<double>(k);
    terms[static_cast<std::size_t>(k)] =
        log_binomial(alpha, k) + (alpha - k) * log_1mq + kk * log_q +
        delta_u * delta_u * (kk * kk - kk) / s2;
  }
  return log_sum_exp(terms) / (alpha - 1.0);
}

double baseline_sgm_rdp(int alpha, double q, const MechanismParams& params) {
  params.validate();
  return sgm_rdp_bound(alpha, q, params.clip, params.sigma);
}

double gaussian_rdp(double alpha, double delta_u, double sigma) {
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
  if (!(delta_u >= 0.0))
    throw std::invalid_argument("delta_u must be nonnegative");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  return alpha * delta_u * delta_u / (2.0 * sigma * sigma);
}

DpGuarantee rdp_to_dp(double alpha, double epsilon_rdp, double delta) {
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
  if (!(epsilon_rdp >= 0.0))
    throw std::invalid_argument("epsilon_rdp must be nonnegative");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("delta must lie in (0, 1)");
  return DpGuarantee{epsilon_rdp + std::log(1.0 / delta) / (alpha - 1.0),
                     delta};
}

double weak_triangle(double alpha, double d_two_alpha,
                     double d_two_alpha_minus_one) {
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
  if (!(d_two_alpha >= 0.0) || !(d_two_alpha_minus_one >= 0.0))
    throw std::invalid_argument("divergences must be nonnegative");
  return (alpha - 0.5) / (alpha - 1.0) * d_two_alpha + d_two_alpha_minus_one;
}

PerStepBound per_step_bound(double alpha, double q, double delta_u,
                            double sigma) {
  const RenyiOrder order = RenyiOrder::from(alpha);
  const double eps = sgm_rdp_bound(order.integer_alpha, q, delta_u, sigma);
  return PerStepBound{order, eps, Direction::kMax};
}

}  // namespace pidp
