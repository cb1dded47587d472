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

#ifndef PIDP_MATH_HPP_
#define PIDP_MATH_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace pidp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Largest x such that exp(x) is still a finite double.
inline constexpr double kLogSpaceBudget = 709.0;

// ln(sum_i exp(x_i)) without intermediate overflow. Empty input gives -inf;
// entries equal to -inf contribute nothing.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return kNegInf;
  const double m = *std::max_element(xs.begin(), xs.end());
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == kNegInf) return kNegInf;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// ln(mean_i exp(x_i)).
inline double log_mean_exp(std::span<const double> xs) {
  if (xs.empty()) return kNegInf;
  return log_sum_exp(xs) - std::log(static_cast<double>(xs.size()));
}

// ln C(n, k) via log-gamma.
inline double log_binomial(int n, int k) {
  if (k < 0 || k > n) return kNegInf;
  if (k == 0 || k == n) return 0.0;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace pidp

#endif  // PIDP_MATH_HPP_
