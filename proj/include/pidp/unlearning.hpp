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

#ifndef PIDP_UNLEARNING_HPP_
#define PIDP_UNLEARNING_HPP_

#include <optional>
#include <span>
#include <vector>

namespace pidp {

// The keep-condition coefficient on the order-2*alpha divergence. The
// guarantee's derivation uses (alpha - 1/2)/(alpha - 1), which is the
// default; the alternative (alpha - 1)/(alpha - 2) form stays selectable
// for comparison.
enum class NpiuCoefficient { kProof, kText };

double npiu_coefficient(int alpha, NpiuCoefficient variant);

struct LedgerEntry {
  int request_index = 0;  // 1-based
  double d_high = 0.0;    // D_{2 alpha}(served || A(D^{t-1}))
  double d_step = 0.0;    // D_{2 alpha - 1}(A(D^{t-1}) || A(D^t))
  bool keep = false;
  double served_bound = 0.0;  // guaranteed D_alpha(served || A(D^t))
};

// Keep-vs-retrain ledger: serve the stale model while the weak-triangle
// budget stays under beta, retrain otherwise. The accumulated bound resets
// to zero at a retrain; divergences are injected by the caller, never
// measured here.
class UnlearningLedger {
 public:
  UnlearningLedger(double beta, int alpha,
                   NpiuCoefficient variant = NpiuCoefficient::kProof);

  struct Decision {
    bool keep;
    double served_bound;
    // Order the divergence source must supply for the *next* request.
    double next_required_order;
  };

  // keep iff coeff * d_high + d_step <= beta. Immediately after a retrain
  // the served model equals the retrain target, so d_high must be 0 then.
  Decision npiu_step(double d_high, double d_step);

  double beta() const { return beta_; }
  int alpha() const { return alpha_; }
  static constexpr double kGamma = 0.0;  // NPIU fails with probability 0
  double accumulated_bound() const { return accumulated_bound_; }
  int requests_since_retrain() const { return kept_since_retrain_; }
  int last_retrain_index() const { return last_retrain_index_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }

 private:
  double beta_;
  int alpha_;
  NpiuCoefficient variant_;
  double accumulated_bound_ = 0.0;
  int kept_since_retrain_ = 0;
  int last_retrain_index_ = 0;
  bool just_retrained_ = true;  // fresh ledger serves the exact model
  std::vector<LedgerEntry> entries_;
};

// Renyi order the ledger must be able to evaluate after t kept requests:
// the weak triangle doubles the order once per recursion level, so the
// requirement is 2^t * alpha. Returned as double so long keep streaks do
// not overflow.
double recursive_order_requirement(int t, int alpha);

struct RequestDivergences {
  double d_high = 0.0;
  double d_step = 0.0;
  // Largest order the source can evaluate; when present the harness errors
  // out as soon as the doubling requirement exceeds it.
  std::optional<double> max_order;
};

// Replays a request stream through the ledger. For the request right after
// a retrain the served model coincides with the retrain target, so the
// harness substitutes d_high = 0 regardless of the source value.
std::vector<LedgerEntry> simulate_request_stream(
    UnlearningLedger& ledger, std::span<const RequestDivergences> requests);

}  // namespace pidp

#endif  // PIDP_UNLEARNING_HPP_
