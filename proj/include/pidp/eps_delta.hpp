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

#ifndef PIDP_EPS_DELTA_HPP_
#define PIDP_EPS_DELTA_HPP_

#include <optional>
#include <vector>

namespace pidp {

// The three deltas of the per-instance (eps, delta)-DP bound:
// delta for the underlying Gaussian mechanism, delta_prime for the Hoelder
// case split, and the final delta_double_prime = q*delta + delta_prime.
struct DeltaSplit {
  double delta;
  double delta_prime;
  double delta_double_prime;

  // Builds the split from the final delta'' with delta' = delta''/2 by
  // default (both overridable through the explicit factory below).
  static DeltaSplit from_total(double delta_double_prime, double q);
  static DeltaSplit from_total(double delta_double_prime, double delta_prime,
                               double q);
  static DeltaSplit from_parts(double delta, double delta_prime, double q);

  void validate() const;
};

// Draws of the sensitivity Delta_{U,x*}(X_B) over sampled minibatches.
// The module never samples minibatches itself; values come from simulator
// draws or trace files.
struct SensitivitySamples {
  std::vector<double> values;
  std::optional<double> clip_bound;  // declared cap, when known

  void validate() const;
};

struct HolderExponent {
  double p;

  void validate() const;
};

// sqrt(2 ln(1.25/delta)) / sigma; the Gaussian-mechanism DP constant.
double gauss_dp_constant(double delta, double sigma);

// (mean_i exp(c * Delta_i * p))^(1/p), computed in log space. Throws
// NumericError when the result exceeds the log-space budget even after the
// log-mean-exp (the moment itself would be infinite as a double).
double holder_moment(const SensitivitySamples& samples, HolderExponent p,
                     double c);

struct EpsDeltaBound {
  double epsilon_prime;
  double delta_double_prime;
  double a_p;  // q * holder moment
  // The bound covers the P(M(X') in S) <= e^eps' P(M(X) in S) + delta''
  // direction only.
  static constexpr const char* kDirectionLabel = "xprime_vs_x";
};

// Per-instance (eps', delta'')-DP bound for the subsampled Gaussian
// mechanism from the sensitivity samples:
//   a_p  = q * (E exp(c Delta p))^(1/p)        with c = gauss_dp_constant
//   eps' = ln( a_p^(1/(1-1/p)) * delta'^(-1/(p-1)) + (1-q) )
//   delta'' = q*delta + delta'
EpsDeltaBound per_instance_eps_delta(double q, double delta,
                                     double delta_prime, HolderExponent p,
                                     const SensitivitySamples& samples,
                                     double sigma);

// Data-independent amplified baseline ln(q e^{c delta_u_max} + (1-q)).
double classical_amplified_eps(double q, double c, double delta_u_max);

}  // namespace pidp

#endif  // PIDP_EPS_DELTA_HPP_
