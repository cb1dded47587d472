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

#include "pidp/unlearning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pidp/errors.hpp"

namespace pidp {

double npiu_coefficient(int alpha, NpiuCoefficient variant) {
  if (alpha < 2) throw std::invalid_argument("alpha must be an integer >= 2");
  if (variant == NpiuCoefficient::kText && alpha == 2)
    throw std::invalid_argument(
        "text coefficient (alpha-1)/(alpha-2) needs alpha >= 3");
  return variant == NpiuCoefficient::kProof
             ? (alpha - 0.5) / (alpha - 1.0)
             : (alpha - 1.0) / (alpha - 2.0);
}

UnlearningLedger::UnlearningLedger(double beta, int alpha,
                                   NpiuCoefficient variant)
    : beta_(beta), alpha_(alpha), variant_(variant) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  npiu_coefficient(alpha, variant);  // validates alpha for the variant
}

UnlearningLedger::Decision UnlearningLedger::npiu_step(double d_high,
                                                       double d_step) {
  if (!(d_high >= 0.0) || !(d_step >= 0.0))
    throw std::invalid_argument("divergence inputs must be nonnegative");
  if (just_retrained_ && d_high != 0.0)
    throw std::invalid_argument(
        "served model equals the retrain target; d_high must be 0");

  const double coeff = npiu_coefficient(alpha_, variant_);
  const double triangle = coeff * d_high + d_step;
  // Ties at the budget count as keep; the tolerance absorbs the rounding
  // of the coefficient product so decimal inputs behave as written.
  const bool keep =
      triangle <= beta_ + 1e-12 * std::max(1.0, std::abs(beta_));

  LedgerEntry entry;
  entry.request_index = static_cast<int>(entries_.size()) + 1;
  entry.d_high = d_high;
  entry.d_step = d_step;
  entry.keep = keep;
  entry.served_bound = keep ? triangle : 0.0;
  entries_.push_back(entry);

  if (keep) {
    accumulated_bound_ = triangle;
    ++kept_since_retrain_;
    just_retrained_ = false;
  } else {
    accumulated_bound_ = 0.0;
    kept_since_retrain_ = 0;
    last_retrain_index_ = entry.request_index;
    just_retrained_ = true;
  }
  return Decision{keep, entry.served_bound,
                  recursive_order_requirement(kept_since_retrain_ + 1, alpha_)};
}

double recursive_order_requirement(int t, int alpha) {
  if (t < 0) throw std::invalid_argument("t must be nonnegative");
  if (alpha < 2) throw std::invalid_argument("alpha must be an integer >= 2");
  return std::ldexp(static_cast<double>(alpha), t);  // 2^t * alpha
}

std::vector<LedgerEntry> simulate_request_stream(
    UnlearningLedger& ledger, std::span<const RequestDivergences> requests) {
  std::vector<LedgerEntry> log;
  log.reserve(requests.size());
  bool served_is_target = ledger.requests_since_retrain() == 0;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const RequestDivergences& req = requests[i];
    if (req.max_order) {
      // Condition t after k keeps recurses k levels deep, doubling each time.
      const double needed = recursive_order_requirement(
          ledger.requests_since_retrain() + 1, ledger.alpha());
      if (needed > *req.max_order)
        throw SchemaError("request " + std::to_string(i + 1) +
                          " needs divergences at order " +
                          std::to_string(needed) +
                          " but the source only supplies up to " +
                          std::to_string(*req.max_order));
    }
    const double d_high = served_is_target ? 0.0 : req.d_high;
    const auto decision = ledger.npiu_step(d_high, req.d_step);
    served_is_target = !decision.keep;
    log.push_back(ledger.entries().back());
  }
  return log;
}

}  // namespace pidp
