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

#include "pidp/general_update.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pidp/errors.hpp"
#include "pidp/math.hpp"
#include "pidp/vec.hpp"

namespace pidp {
namespace {

constexpr double kNormalZ99 = 2.5758293035489004;

void check_mc_args(int alpha, double sigma, int m_outer, int m_inner) {
  if (alpha < 2) throw std::invalid_argument("alpha must be an integer >= 2");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (m_outer < 1 || m_inner < 1)
    throw std::invalid_argument("sample counts must be >= 1");
}

// Multiset enumeration: iterates over counts (c_0..c_{s-1}) with sum alpha.
template <typename Fn>
void for_each_multiset(int support, int alpha, std::vector<int>& counts,
                       int index, int remaining, Fn&& fn) {
  if (index == support - 1) {
    counts[static_cast<std::size_t>(index)] = remaining;
    fn(counts);
    return;
  }
  for (int c = 0; c <= remaining; ++c) {
    counts[static_cast<std::size_t>(index)] = c;
    for_each_multiset(support, alpha, counts, index + 1, remaining - c, fn);
  }
}

}  // namespace

void DiscreteUpdateDistribution::validate() const {
  if (support.empty() || support.size() != prob.size())
    throw std::invalid_argument("support and prob must be nonempty and match");
  double total = 0.0;
  for (double p : prob) {
    if (!(p >= 0.0)) throw std::invalid_argument("probabilities must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("probabilities must sum to 1");
  const std::size_t d = support.front().size();
  for (const auto& u : support)
    if (u.size() != d)
      throw std::invalid_argument("update dimensions must be uniform");
}

UpdateVector DiscreteUpdateDistribution::draw(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    acc += prob[i];
    if (u < acc) return support[i];
  }
  return support.back();
}

DiscreteUpdateSampler::DiscreteUpdateSampler(DiscreteUpdateDistribution dist)
    : dist_(std::move(dist)) {
  dist_.validate();
}

int DiscreteUpdateSampler::dim() const {
  return static_cast<int>(dist_.support.front().size());
}

UpdateVector delta_alpha(std::span<const UpdateVector> tuple,
                         const UpdateVector& single) {
  if (tuple.size() < 2)
    throw std::invalid_argument("tuple must hold at least 2 updates (alpha)");
  const std::size_t d = single.size();
  UpdateVector out(d, 0.0);
  for (const auto& u : tuple) {
    if (u.size() != d) throw std::invalid_argument("dimension mismatch");
    axpy(1.0, u, out);
  }
  axpy(-(static_cast<double>(tuple.size()) - 1.0), single, out);
  return out;
}

double delta_u_alpha(std::span<const UpdateVector> tuple,
                     const UpdateVector& single) {
  const UpdateVector da = delta_alpha(tuple, single);
  double sum_sq = 0.0;
  for (const auto& u : tuple) sum_sq += squared_norm(u);
  const double am1 = static_cast<double>(tuple.size()) - 1.0;
  return sum_sq - am1 * squared_norm(single) - squared_norm(da);
}

McEstimate mc_divergence_bound(UpdateSampler& sampler_outer,
                               UpdateSampler& sampler_inner, int alpha,
                               double sigma, int m_outer, int m_inner,
                               std::uint64_t seed) {
  check_mc_args(alpha, sigma, m_outer, m_inner);
  if (sampler_outer.dim() != sampler_inner.dim())
    throw std::invalid_argument("sampler dimensions must match");

  Rng rng(derive_seed(seed, 0x67656e65));  // one stream per evaluation
  const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);

  std::vector<double> outer_values(static_cast<std::size_t>(m_outer));
  std::vector<UpdateVector> tuple(static_cast<std::size_t>(alpha));
  std::vector<double> inner_exponents(static_cast<std::size_t>(m_inner));
  for (int j = 0; j < m_outer; ++j) {
    const UpdateVector v = sampler_outer.draw(rng);
    for (int k = 0; k < m_inner; ++k) {
      for (int a = 0; a < alpha; ++a)
        tuple[static_cast<std::size_t>(a)] = sampler_inner.draw(rng);
      const double d = delta_u_alpha(tuple, v);
      if (!std::isfinite(d))
        throw NumericError("non-finite sensitivity in inner expectation");
      inner_exponents[static_cast<std::size_t>(k)] = -d * inv_2s2;
    }
    const double lme = log_mean_exp(inner_exponents);
    if (!std::isfinite(lme))
      throw NumericError("inner log-mean-exp overflowed");
    outer_values[static_cast<std::size_t>(j)] = lme;
  }

  double mean = 0.0;
  for (double x : outer_values) mean += x;
  mean /= m_outer;
  double var = 0.0;
  for (double x : outer_values) var += (x - mean) * (x - mean);
  var = m_outer > 1 ? var / (m_outer - 1.0) : 0.0;

  McEstimate est;
  est.epsilon = mean / (alpha - 1.0);
  est.ci_halfwidth =
      kNormalZ99 * std::sqrt(var / m_outer) / (alpha - 1.0);
  est.m_outer = m_outer;
  est.m_inner = m_inner;
  return est;
}

double enumerated_divergence_bound(const DiscreteUpdateDistribution& outer,
                                   const DiscreteUpdateDistribution& inner,
                                   int alpha, double sigma) {
  outer.validate();
  inner.validate();
  check_mc_args(alpha, sigma, 1, 1);
  if (outer.support.front().size() != inner.support.front().size())
    throw std::invalid_argument("update dimensions must match");

  const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
  const int s = static_cast<int>(inner.support.size());
  const double log_alpha_fact = std::lgamma(alpha + 1.0);

  double result = 0.0;
  std::vector<int> counts(static_cast<std::size_t>(s));
  std::vector<double> tuple_terms;
  for (std::size_t ov = 0; ov < outer.support.size(); ++ov) {
    if (outer.prob[ov] == 0.0) continue;
    const UpdateVector& v = outer.support[ov];
    tuple_terms.clear();
    for_each_multiset(s, alpha, counts, 0, alpha, [&](const std::vector<int>& c) {
      // Multinomial weight of this multiset of inner draws.
      double log_w = log_alpha_fact;
      std::vector<UpdateVector> tuple;
      tuple.reserve(static_cast<std::size_t>(alpha));
      for (int i = 0; i < s; ++i) {
        const int ci = c[static_cast<std::size_t>(i)];
        if (ci == 0) continue;
        if (inner.prob[static_cast<std::size_t>(i)] == 0.0) return;
        log_w += ci * std::log(inner.prob[static_cast<std::size_t>(i)]) -
                 std::lgamma(ci + 1.0);
        for (int r = 0; r < ci; ++r)
          tuple.push_back(inner.support[static_cast<std::size_t>(i)]);
      }
      const double d = delta_u_alpha(tuple, v);
      tuple_terms.push_back(log_w - d * inv_2s2);
    });
    result += outer.prob[ov] * log_sum_exp(tuple_terms);
  }
  return result / (alpha - 1.0);
}

GeneralBound per_instance_bound_general(UpdateSampler& sampler_x,
                                        UpdateSampler& sampler_xprime,
                                        int alpha, double sigma, int m_outer,
                                        int m_inner, std::uint64_t seed) {
  GeneralBound out;
  out.xprime_to_x =
      mc_divergence_bound(sampler_x, sampler_xprime, alpha, sigma, m_outer,
                          m_inner, derive_seed(seed, 1));
  out.x_to_xprime =
      mc_divergence_bound(sampler_xprime, sampler_x, alpha, sigma, m_outer,
                          m_inner, derive_seed(seed, 2));
  out.bound.order = RenyiOrder{static_cast<double>(alpha), alpha};
  out.bound.epsilon =
      std::max(out.xprime_to_x.epsilon, out.x_to_xprime.epsilon);
  out.bound.direction = Direction::kMax;
  return out;
}

}  // namespace pidp
