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

#ifndef PIDP_ACCOUNTANT_HPP_
#define PIDP_ACCOUNTANT_HPP_

namespace pidp {

// Which divergence direction a bound refers to. For the subsampled Gaussian
// per-step series both directions are dominated by the same value, so those
// bounds carry kMax.
enum class Direction { kXToXprime, kXprimeToX, kMax };

const char* direction_name(Direction d);

// Description of one subsampled Gaussian release: Poisson-sample with
// per-point probability q, apply the update rule, add N(0, sigma^2) noise.
// sigma, clip and delta arguments live in the same space the noise is added
// in (un-normalized update space unless the caller consistently rescales
// everything by 1/L; the bounds only depend on delta/sigma and q).
struct MechanismParams {
  double sigma = 1.0;       // std of the added Gaussian noise
  double q = 0.0;           // per-point inclusion probability
  double clip = 1.0;        // worst-case per-point sensitivity bound C
  double normalizer = 1.0;  // L; bookkeeping only, bounds are scale-free

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

// A Renyi order together with the integer order actually used by the
// per-step formulas (the ceiling; bounds at the ceiling dominate).
struct RenyiOrder {
  double alpha = 2.0;
  int integer_alpha = 2;

  static RenyiOrder from(double alpha);
};

struct PerStepBound {
  RenyiOrder order;
  double epsilon = 0.0;
  Direction direction = Direction::kMax;
};

struct DpGuarantee {
  double epsilon = 0.0;
  double delta = 1e-5;
};

// Smallest integer order >= alpha and >= 2. Throws on alpha <= 1.
int ceil_order(double alpha);

// Per-step Renyi bound of the subsampled Gaussian mechanism at integer
// order alpha, per-instance sensitivity delta_u, noise sigma:
//
//   eps = 1/(alpha-1) * ln sum_{k=0}^{alpha}
//         C(alpha,k) (1-q)^(alpha-k) q^k exp(delta_u^2 (k^2-k) / (2 sigma^2))
//
// Evaluated with log-binomials and log-sum-exp, so arguments up to
// delta_u^2 alpha^2 / (2 sigma^2) ~ 700 do not overflow. q=0 and q=1 are
// explicit branches (0 and the pure Gaussian value respectively).
double sgm_rdp_bound(int alpha, double q, double delta_u, double sigma);

// Data-independent per-step bound: sgm_rdp_bound with delta_u = params.clip.
// Callers working in normalized space must pass params already divided
// through by L so the convention matches the per-instance call.
double baseline_sgm_rdp(int alpha, double q, const MechanismParams& params);

// Gaussian mechanism Renyi divergence alpha * delta_u^2 / (2 sigma^2).
double gaussian_rdp(double alpha, double delta_u, double sigma);

// Standard RDP -> (eps, delta)-DP conversion:
// eps = eps_rdp + ln(1/delta) / (alpha - 1).
DpGuarantee rdp_to_dp(double alpha, double epsilon_rdp, double delta);

// Weak triangle inequality for Renyi divergences:
// D_alpha(P||R) <= ((alpha - 1/2)/(alpha - 1)) D_2alpha(P||Q)
//                  + D_{2alpha-1}(Q||R).
// Returns the right-hand side.
double weak_triangle(double alpha, double d_two_alpha,
                     double d_two_alpha_minus_one);

// Convenience wrapper for callers holding a real-valued order: ceils the
// order, evaluates the series at the ceiling and records both orders.
PerStepBound per_step_bound(double alpha, double q, double delta_u,
                            double sigma);

}  // namespace pidp

#endif  // PIDP_ACCOUNTANT_HPP_
