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

#include "pidp/composition.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pidp/errors.hpp"
#include "pidp/math.hpp"

namespace pidp {
namespace {

void check_alpha_n(int alpha, int n) {
  if (alpha < 2) throw std::invalid_argument("alpha must be an integer >= 2");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
}

double normal_quantile_two_sided(double J) {
  // Acklam-style rational approximation of the inverse normal CDF at
  // 1 - J/2; accurate to ~1e-9, plenty for reporting a CI width.
  const double pq = 1.0 - 0.5 * J;
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (pq > 1.0 - plow) {
    const double u = std::sqrt(-2.0 * std::log(1.0 - pq));
    return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u +
            c[5]) /
           ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  const double u = pq - 0.5;
  const double r = u * u;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
         u /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

struct StepTerm {
  double contribution;
  double ci;
};

// Weighted term of one sampled step: weight * ln mean_r exp(factor * d_r),
// with the mean and the CI evaluated in log space.
StepTerm sampled_step_term(std::span<const double> ds, double factor,
                           double weight, double inv_alpha_minus_one,
                           const ComposeOptions& options) {
  std::vector<double> exponents;
  exponents.reserve(ds.size());
  for (double d : ds) {
    if (!(d >= 0.0))
      throw std::invalid_argument("divergence samples must be nonnegative");
    if (options.sample_cap && d > *options.sample_cap + 1e-12)
      throw SchemaError("divergence sample " + std::to_string(d) +
                        " exceeds the declared cap " +
                        std::to_string(*options.sample_cap) +
                        "; Hoeffding interval would be invalid");
    exponents.push_back(factor * d);
  }
  const double lme = log_mean_exp(exponents);
  const double contribution = weight * inv_alpha_minus_one * lme;

  // log of the CI half-width of the run mean of exp(factor d).
  const double l = static_cast<double>(ds.size());
  double log_hw;
  if (options.sample_cap) {
    log_hw = factor * *options.sample_cap +
             0.5 * std::log(std::log(2.0 / options.ci_failure) / (2.0 * l));
  } else if (ds.size() > 1) {
    std::vector<double> sq(exponents);
    for (double& x : sq) x *= 2.0;
    const double lme2 = log_mean_exp(sq);  // log E f^2
    const double ratio = 2.0 * lme - lme2;
    const double log_var = ratio < -1e-15 ? lme2 + std::log1p(-std::exp(ratio))
                                          : kNegInf;
    log_hw = log_var == kNegInf
                 ? kNegInf
                 : std::log(normal_quantile_two_sided(options.ci_failure)) +
                       0.5 * log_var - 0.5 * std::log(l) +
                       0.5 * std::log(l / (l - 1.0));
  } else {
    log_hw = kNegInf;
  }
  // One-sided increase of the contribution if the mean were mean + hw.
  const double ci =
      log_hw == kNegInf
          ? 0.0
          : weight * inv_alpha_minus_one * std::log1p(std::exp(log_hw - lme));
  return StepTerm{contribution, ci};
}

}  // namespace

double g_p_apply(double p, double alpha, GpVariant v) {
  if (!(p > 1.0)) throw std::invalid_argument("p must exceed 1");
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
  const double lead = p / (p - 1.0) * alpha;
  return v == GpVariant::kProof ? lead - 1.0 / (p - 1.0) : lead - 1.0 / p;
}

std::vector<double> order_schedule(double p, int alpha, int n, GpVariant v) {
  check_alpha_n(alpha, n);
  std::vector<double> orders(static_cast<std::size_t>(n));
  orders[0] = alpha;
  for (int i = 1; i < n; ++i)
    orders[static_cast<std::size_t>(i)] =
        g_p_apply(p, orders[static_cast<std::size_t>(i - 1)], v);
  return orders;
}

double choose_p(int n, int alpha, GpVariant v) {
  check_alpha_n(alpha, n);
  for (double p = 3.0 * n;; p += 1.0) {
    // orders are monotone in i, so only the last entry needs checking.
    double order = alpha;
    for (int i = 1; i < n; ++i) order = g_p_apply(p, order, v);
    if (order <= 2.0 * alpha) return p;
  }
}

CompositionPlan CompositionPlan::make(int n, int alpha, double p,
                                      GpVariant v) {
  check_alpha_n(alpha, n);
  if (!(p > 1.0)) throw std::invalid_argument("p must exceed 1");
  return CompositionPlan{n, p, alpha, order_schedule(p, alpha, n, v), v};
}

CompositionPlan CompositionPlan::auto_p(int n, int alpha, GpVariant v) {
  return make(n, alpha, choose_p(n, alpha, v), v);
}

double CompositionPlan::order_for_step(int step) const {
  if (step < 1 || step > n) throw std::invalid_argument("step out of range");
  return orders[static_cast<std::size_t>(n - step)];
}

StepSampleMatrix::StepSampleMatrix(int runs, int steps)
    : runs_(runs), steps_(steps) {
  if (runs < 1 || steps < 1)
    throw std::invalid_argument("matrix needs at least one run and one step");
  cells_.resize(static_cast<std::size_t>(runs) * steps);
}

StepSampleMatrix::Cell& StepSampleMatrix::cell(int run, int step) {
  if (run < 0 || run >= runs_ || step < 1 || step > steps_)
    throw std::invalid_argument("sample index out of range");
  return cells_[static_cast<std::size_t>(run) * steps_ + (step - 1)];
}

const StepSampleMatrix::Cell& StepSampleMatrix::cell(int run, int step) const {
  return const_cast<StepSampleMatrix*>(this)->cell(run, step);
}

void StepSampleMatrix::set(int run, int step, double order, double d,
                           std::string checkpoint_id) {
  if (!(d >= 0.0))
    throw std::invalid_argument("divergence samples must be nonnegative");
  Cell& c = cell(run, step);
  c.order = order;
  c.d = d;
  c.checkpoint_id = std::move(checkpoint_id);
  c.present = true;
}

double StepSampleMatrix::d(int run, int step) const { return cell(run, step).d; }
double StepSampleMatrix::order(int run, int step) const {
  return cell(run, step).order;
}
const std::string& StepSampleMatrix::checkpoint(int run, int step) const {
  return cell(run, step).checkpoint_id;
}

void StepSampleMatrix::validate(const CompositionPlan& plan) const {
  if (steps_ != plan.n)
    throw SchemaError("sample matrix covers " + std::to_string(steps_) +
                      " steps but the plan has " + std::to_string(plan.n));
  for (int step = 2; step <= steps_; ++step) {
    const double want = plan.order_for_step(step);
    for (int run = 0; run < runs_; ++run) {
      const Cell& c = cell(run, step);
      if (!c.present)
        throw SchemaError("missing divergence sample for run " +
                          std::to_string(run) + ", step " +
                          std::to_string(step));
      if (std::abs(c.order - want) > 1e-9 * std::max(1.0, want))
        throw SchemaError("sample order " + std::to_string(c.order) +
                          " at step " + std::to_string(step) +
                          " disagrees with the scheduled order " +
                          std::to_string(want));
    }
  }
}

CompositionResult compose(const CompositionPlan& plan,
                          const StepSampleMatrix& samples,
                          double first_step_bound,
                          const ComposeOptions& options) {
  if (!(first_step_bound >= 0.0))
    throw std::invalid_argument("first_step_bound must be nonnegative");
  if (plan.n > 1) samples.validate(plan);

  const int n = plan.n;
  const double p = plan.p;
  const double inv_am1 = 1.0 / (plan.alpha - 1.0);
  const double log_r = std::log1p(-1.0 / p);  // ln((p-1)/p)

  CompositionResult result;
  result.per_step_contributions.assign(static_cast<std::size_t>(n), 0.0);
  result.estimator_ci.assign(static_cast<std::size_t>(n), 0.0);

  // Sampled steps: i = 0 .. n-2 maps to step n-i.
  for (int i = 0; i <= n - 2; ++i) {
    const int step = n - i;
    const double g = plan.orders[static_cast<std::size_t>(i)];
    // (p-1)^i / p^{i+1} = r^i / p with r = (p-1)/p; via exp so long
    // schedules keep full precision.
    const double weight = std::exp(i * log_r) / p;
    std::vector<double> ds(static_cast<std::size_t>(samples.runs()));
    for (int run = 0; run < samples.runs(); ++run)
      ds[static_cast<std::size_t>(run)] = samples.d(run, step);
    const StepTerm term =
        sampled_step_term(ds, p * (g - 1.0), weight, inv_am1, options);
    result.per_step_contributions[static_cast<std::size_t>(step - 1)] =
        term.contribution;
    result.estimator_ci[static_cast<std::size_t>(step - 1)] = term.ci;
  }

  // Deterministic first step at the largest order. For n = 1 the formula
  // collapses to the bound itself ((g-1)/(alpha-1) = 1, weight 1); return it
  // without the roundtrip through the factors.
  if (n == 1) {
    result.per_step_contributions[0] = first_step_bound;
  } else {
    const double g_last = plan.orders[static_cast<std::size_t>(n - 1)];
    const double w_last = std::exp((n - 1) * log_r);
    result.per_step_contributions[0] =
        inv_am1 * w_last * (g_last - 1.0) * first_step_bound;
  }
  result.estimator_ci[0] = 0.0;

  double total = 0.0;
  for (double c : result.per_step_contributions) total += c;
  result.total_epsilon = total;
  return result;
}

CompositionResult compose_cs(int alpha, const StepSampleMatrix& samples,
                             double first_step_bound, int n,
                             const ComposeOptions& options) {
  check_alpha_n(alpha, n);
  if (!(first_step_bound >= 0.0))
    throw std::invalid_argument("first_step_bound must be nonnegative");

  // Schedule g(alpha) = 2 alpha - 1 iterated.
  std::vector<double> orders(static_cast<std::size_t>(n));
  orders[0] = alpha;
  for (int i = 1; i < n; ++i)
    orders[static_cast<std::size_t>(i)] =
        2.0 * orders[static_cast<std::size_t>(i - 1)] - 1.0;

  CompositionPlan plan{n, 2.0, alpha, orders, GpVariant::kProof};
  if (n > 1) samples.validate(plan);

  const double inv_am1 = 1.0 / (alpha - 1.0);
  CompositionResult result;
  result.per_step_contributions.assign(static_cast<std::size_t>(n), 0.0);
  result.estimator_ci.assign(static_cast<std::size_t>(n), 0.0);

  double half_power = 0.5;  // 1/2^{i+1}
  for (int i = 0; i <= n - 2; ++i, half_power *= 0.5) {
    const int step = n - i;
    const double g = orders[static_cast<std::size_t>(i)];
    std::vector<double> ds(static_cast<std::size_t>(samples.runs()));
    for (int run = 0; run < samples.runs(); ++run)
      ds[static_cast<std::size_t>(run)] = samples.d(run, step);
    const StepTerm term =
        sampled_step_term(ds, 2.0 * (g - 1.0), half_power, inv_am1, options);
    result.per_step_contributions[static_cast<std::size_t>(step - 1)] =
        term.contribution;
    result.estimator_ci[static_cast<std::size_t>(step - 1)] = term.ci;
  }

  // (1/2)^n ln exp(2 (g^{n-1}(alpha) - 1) first_step).
  if (n == 1) {
    result.per_step_contributions[0] = first_step_bound;
  } else {
    const double g_last = orders[static_cast<std::size_t>(n - 1)];
    result.per_step_contributions[0] =
        inv_am1 * half_power * (2.0 * (g_last - 1.0) * first_step_bound);
  }
  double total = 0.0;
  for (double c : result.per_step_contributions) total += c;
  result.total_epsilon = total;
  return result;
}

std::int64_t sample_size(double J, double c, int alpha, double eps_step,
                         double eps_prime_step) {
  if (!(J > 0.0 && J < 1.0)) throw std::invalid_argument("J must lie in (0,1)");
  if (!(c > 0.0 && c <= 1.0))
    throw std::invalid_argument("c must lie in (0, 1]");
  if (alpha < 2) throw std::invalid_argument("alpha must be an integer >= 2");
  if (!(eps_step >= 0.0) || !(eps_prime_step >= 0.0))
    throw std::invalid_argument("per-step guarantees must be nonnegative");
  const double l = -std::log(J) / (c * c) *
                   std::exp(6.0 * (alpha - 1.0) * eps_step -
                            3.0 * (2.0 * alpha - 1.0) * eps_prime_step);
  return static_cast<std::int64_t>(std::ceil(l));
}

MeanCi estimate_mean_with_ci(std::span<const double> samples,
                             double upper_bound, double J) {
  if (samples.empty()) throw std::invalid_argument("samples must be nonempty");
  if (!(upper_bound > 0.0))
    throw std::invalid_argument("upper_bound must be positive");
  if (!(J > 0.0 && J < 1.0)) throw std::invalid_argument("J must lie in (0,1)");
  double sum = 0.0;
  for (double s : samples) {
    if (!(s >= 0.0) || s > upper_bound)
      throw std::invalid_argument(
          "sample outside [0, upper_bound]; Hoeffding interval invalid");
    sum += s;
  }
  const double l = static_cast<double>(samples.size());
  return MeanCi{sum / l,
                upper_bound * std::sqrt(std::log(2.0 / J) / (2.0 * l))};
}

}  // namespace pidp
