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

#ifndef PIDP_GENERAL_UPDATE_HPP_
#define PIDP_GENERAL_UPDATE_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "pidp/accountant.hpp"
#include "pidp/rng.hpp"

namespace pidp {

// The update U(X_B) in parameter space.
using UpdateVector = std::vector<double>;

// Yields independent UpdateVectors distributed as U(X_B) for minibatches
// drawn from a fixed dataset at a fixed checkpoint. The dataset and
// checkpoint stay immutable for the sampler's lifetime.
class UpdateSampler {
 public:
  virtual ~UpdateSampler() = default;
  virtual UpdateVector draw(Rng& rng) = 0;
  virtual int dim() const = 0;
};

// Finite-support update distribution; powers both sampling and exhaustive
// enumeration for small test mechanisms.
struct DiscreteUpdateDistribution {
  std::vector<UpdateVector> support;
  std::vector<double> prob;

  void validate() const;
  UpdateVector draw(Rng& rng) const;
};

class DiscreteUpdateSampler : public UpdateSampler {
 public:
  explicit DiscreteUpdateSampler(DiscreteUpdateDistribution dist);
  UpdateVector draw(Rng& rng) override { return dist_.draw(rng); }
  int dim() const override;

 private:
  DiscreteUpdateDistribution dist_;
};

// Delta_alpha(tuple, single) = sum_i u_i - (alpha - 1) v,
// with alpha = tuple size.
UpdateVector delta_alpha(std::span<const UpdateVector> tuple,
                         const UpdateVector& single);

// Delta_{U,alpha}(tuple, single)
//   = sum_i ||u_i||^2 - (alpha-1) ||v||^2 - ||Delta_alpha||^2.
// May be negative.
double delta_u_alpha(std::span<const UpdateVector> tuple,
                     const UpdateVector& single);

struct McEstimate {
  double epsilon = 0.0;
  double ci_halfwidth = 0.0;  // 99% normal interval on the outer mean
  int m_outer = 0;
  int m_inner = 0;
};

// Nested Monte Carlo estimate of the divergence bound
//   D <= 1/(alpha-1) E_outer[ ln E_inner[ exp(-Delta_{U,alpha}/(2 sigma^2)) ] ]
// where the outer sampler draws U(X_B) from the reference dataset and the
// inner sampler supplies the alpha independent minibatch updates per tuple.
// The CI uses the outer-level sample variance only (normal approximation);
// with deterministic samplers it degenerates to zero width.
McEstimate mc_divergence_bound(UpdateSampler& sampler_outer,
                               UpdateSampler& sampler_inner, int alpha,
                               double sigma, int m_outer, int m_inner,
                               std::uint64_t seed);

// Exact evaluation of the same bound for finite update distributions; tuples
// are enumerated as multisets so the cost is polynomial in alpha.
double enumerated_divergence_bound(const DiscreteUpdateDistribution& outer,
                                   const DiscreteUpdateDistribution& inner,
                                   int alpha, double sigma);

struct GeneralBound {
  PerStepBound bound;    // direction kMax, epsilon = max of both estimates
  McEstimate xprime_to_x;  // outer ~ X, tuples ~ X'
  McEstimate x_to_xprime;  // outer ~ X', tuples ~ X
};

// Estimates both divergence directions and reports the maximum.
GeneralBound per_instance_bound_general(UpdateSampler& sampler_x,
                                        UpdateSampler& sampler_xprime,
                                        int alpha, double sigma, int m_outer,
                                        int m_inner, std::uint64_t seed);

}  // namespace pidp

#endif  // PIDP_GENERAL_UPDATE_HPP_
