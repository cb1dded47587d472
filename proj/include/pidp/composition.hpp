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

#ifndef PIDP_COMPOSITION_HPP_
#define PIDP_COMPOSITION_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pidp {

// The order-growth map g_p has two published forms; the derivation gives
// -1/(p-1), which is the default everywhere. The -1/p form stays available
// behind this switch for sensitivity analysis.
enum class GpVariant { kProof, kStatement };

// g_p(alpha) = (p/(p-1)) alpha - 1/(p-1)   (kProof)
//            = (p/(p-1)) alpha - 1/p       (kStatement)
double g_p_apply(double p, double alpha, GpVariant v = GpVariant::kProof);

// orders[0] = alpha, orders[i] = g_p(orders[i-1]); strictly increasing for
// finite p.
std::vector<double> order_schedule(double p, int alpha, int n,
                                   GpVariant v = GpVariant::kProof);

// Smallest integer p >= 3n whose schedule keeps orders[n-1] <= 2*alpha,
// verified by iterating the schedule.
double choose_p(int n, int alpha, GpVariant v = GpVariant::kProof);

// Release plan: n steps composed at Hoelder constant p starting from order
// alpha; step t carries order orders[n-t] (the first step the largest).
struct CompositionPlan {
  int n;
  double p;
  int alpha;
  std::vector<double> orders;
  GpVariant variant = GpVariant::kProof;

  static CompositionPlan make(int n, int alpha, double p,
                              GpVariant v = GpVariant::kProof);
  // p picked by choose_p.
  static CompositionPlan auto_p(int n, int alpha,
                                GpVariant v = GpVariant::kProof);

  double order_for_step(int step) const;  // step in 1..n
};

// Per-run per-step conditional divergence samples for steps 2..n. Each
// entry records the order it was evaluated at (validated against the plan)
// and the prefix checkpoint it is conditioned on.
class StepSampleMatrix {
 public:
  StepSampleMatrix(int runs, int steps);

  void set(int run, int step, double order, double d,
           std::string checkpoint_id = {});
  // Throws SchemaError when a scheduled (run, step) is missing or its order
  // disagrees with the plan; std::invalid_argument on negative d.
  void validate(const CompositionPlan& plan) const;

  int runs() const { return runs_; }
  int steps() const { return steps_; }
  double d(int run, int step) const;
  double order(int run, int step) const;
  const std::string& checkpoint(int run, int step) const;

 private:
  struct Cell {
    double order = -1.0;
    double d = -1.0;
    std::string checkpoint_id;
    bool present = false;
  };
  const Cell& cell(int run, int step) const;
  Cell& cell(int run, int step);

  int runs_;
  int steps_;
  std::vector<Cell> cells_;
};

struct CompositionResult {
  double total_epsilon = 0.0;
  // Index t-1 holds step t's weighted contribution; they sum to the total.
  std::vector<double> per_step_contributions;
  // One-sided upper half-widths (in contribution units) at the configured
  // confidence. Step 1 is deterministic, its entry is 0.
  std::vector<double> estimator_ci;
};

struct ComposeOptions {
  // Declared cap on the divergence samples (from the classical bound at
  // order 2*alpha). Samples above it are rejected; with a cap present the
  // per-step CI is a Hoeffding interval, otherwise a normal approximation.
  std::optional<double> sample_cap;
  double ci_failure = 0.05;  // J: CI confidence is 1 - J
};

// Expected-per-step composition:
//   total = 1/(alpha-1) [ sum_{i=0}^{n-2} ((p-1)^i / p^{i+1})
//                           ln mean_runs exp( p (g_p^i(alpha)-1) d_{step n-i} )
//                         + ((p-1)/p)^{n-1} (g_p^{n-1}(alpha)-1) first_step ]
// with the run means accumulated by log-mean-exp. first_step_bound is the
// deterministic divergence of step 1 at the largest scheduled order.
CompositionResult compose(const CompositionPlan& plan,
                          const StepSampleMatrix& samples,
                          double first_step_bound,
                          const ComposeOptions& options = {});

// The p = 2 (Cauchy-Schwarz) specialization, kept as an independent route:
// weights 1/2^{i+1} on ln mean exp(2 (g^i(alpha)-1) d) with g(alpha)=2alpha-1,
// and weight (1/2)^n on the squared first-step exponential.
CompositionResult compose_cs(int alpha, const StepSampleMatrix& samples,
                             double first_step_bound, int n,
                             const ComposeOptions& options = {});

// Run count from the estimation calculus:
//   l = ceil( (-ln J)/c^2 * exp(6(alpha-1) eps - 3(2 alpha - 1) eps') )
// where eps, eps' are the classical guarantees at orders alpha and 2 alpha.
std::int64_t sample_size(double J, double c, int alpha, double eps_step,
                         double eps_prime_step);

struct MeanCi {
  double mean;
  double halfwidth;
};

// Sample mean with the Hoeffding half-width upper_bound *
// sqrt(ln(2/J) / (2 l)) at confidence 1-J. Samples must lie in
// [0, upper_bound]; a sample above the declared bound invalidates the
// interval and throws.
MeanCi estimate_mean_with_ci(std::span<const double> samples,
                             double upper_bound, double J);

}  // namespace pidp

#endif  // PIDP_COMPOSITION_HPP_
