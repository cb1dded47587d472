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

#ifndef PIDP_VEC_HPP_
#define PIDP_VEC_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace pidp {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> v) { return dot(v, v); }

inline double l2_norm(std::span<const double> v) {
  return std::sqrt(squared_norm(v));
}

// y += c * x
inline void axpy(double c, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline void scale(std::span<double> v, double c) {
  for (double& x : v) x *= c;
}

inline std::vector<double> zeros(std::size_t n) {
  return std::vector<double>(n, 0.0);
}

}  // namespace pidp

#endif  // PIDP_VEC_HPP_
