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

#include "pidp/eps_delta.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pidp/errors.hpp"
#include "pidp/math.hpp"

namespace pidp {

DeltaSplit DeltaSplit::from_total(double delta_double_prime, double q) {
  return from_total(delta_double_prime, 0.5 * delta_double_prime, q);
}

DeltaSplit DeltaSplit::from_total(double delta_double_prime,
                                  double delta_prime, double q) {
  if (!(q > 0.0 && q <= 1.0))
    throw std::invalid_argument("q must lie in (0, 1] to split delta");
  if (!(delta_double_prime > delta_prime))
    throw std::invalid_argument("delta'' must exceed delta'");
  DeltaSplit s{(delta_double_prime - delta_prime) / q, delta_prime,
               delta_double_prime};
  s.validate();
  return s;
}

DeltaSplit DeltaSplit::from_parts(double delta, double delta_prime, double q) {
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("q must lie in [0, 1]");
  DeltaSplit s{delta, delta_prime, q * delta + delta_prime};
  s.validate();
  return s;
}

void DeltaSplit::validate() const {
  auto in_unit = [](double d) { return d > 0.0 && d < 1.0; };
  if (!in_unit(delta) || !in_unit(delta_prime) || !in_unit(delta_double_prime))
    throw std::invalid_argument("all deltas must lie in (0, 1)");
}

void SensitivitySamples::validate() const {
  if (values.empty())
    throw std::invalid_argument("sensitivity samples must be nonempty");
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("sensitivity values must be nonnegative");
    if (clip_bound && v > *clip_bound + 1e-12)
      throw std::invalid_argument(
          "sensitivity value exceeds the declared clip bound");
  }
}

void HolderExponent::validate() const {
  if (!(p > 1.0)) throw std::invalid_argument("p must exceed 1");
}

double gauss_dp_constant(double delta, double sigma) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  return std::sqrt(2.0 * std::log(1.25 / delta)) / sigma;
}

double holder_moment(const SensitivitySamples& samples, HolderExponent p,
                     double c) {
  samples.validate();
  p.validate();
  if (!(c >= 0.0)) throw std::invalid_argument("c must be nonnegative");

  std::vector<double> exponents;
  exponents.reserve(samples.values.size());
  for (double v : samples.values) exponents.push_back(c * v * p.p);
  const double log_moment = log_mean_exp(exponents) / p.p;
  if (log_moment > kLogSpaceBudget) {
    throw NumericError("holder moment overflows: log value " +
                       std::to_string(log_moment) +
                       " exceeds the log-space budget");
  }
  return std::exp(log_moment);
}

EpsDeltaBound per_instance_eps_delta(double q, double delta,
                                     double delta_prime, HolderExponent p,
                                     const SensitivitySamples& samples,
                                     double sigma) {
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("q must lie in [0, 1]");
  DeltaSplit split = DeltaSplit::from_parts(delta, delta_prime, q);

  const double c = gauss_dp_constant(delta, sigma);
  const double moment = holder_moment(samples, p, c);
  const double a_p = q * moment;

  // ln( a_p^(p/(p-1)) delta'^(-1/(p-1)) + (1-q) ), accumulated in log space
  // so large moments cannot overflow before the final log.
  double eps_prime;
  if (a_p == 0.0) {
    eps_prime = std::log1p(-q);  // q = 0: ln(1 - q) = 0
  } else {
    const double log_term = p.p / (p.p - 1.0) * std::log(a_p) -
                            std::log(delta_prime) / (p.p - 1.0);
    const double log_rest = q < 1.0 ? std::log1p(-q) : kNegInf;
    eps_prime = log_sum_exp(log_term, log_rest);
  }
  return EpsDeltaBound{eps_prime, split.delta_double_prime, a_p};
}

double classical_amplified_eps(double q, double c, double delta_u_max) {
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("q must lie in [0, 1]");
  if (!(c >= 0.0) || !(delta_u_max >= 0.0))
    throw std::invalid_argument("c and delta_u_max must be nonnegative");
  if (q == 0.0) return 0.0;
  const double log_term = std::log(q) + c * delta_u_max;
  const double log_rest = q < 1.0 ? std::log1p(-q) : kNegInf;
  return log_sum_exp(log_term, log_rest);
}

}  // namespace pidp
