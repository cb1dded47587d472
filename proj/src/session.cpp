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

#include "pidp/session.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "pidp/errors.hpp"
#include "pidp/math.hpp"
#include "pidp/vec.hpp"

namespace pidp {
namespace {

using nlohmann::json;

UpdateRule rule_from_name(const std::string& name) {
  if (name == "sum") return UpdateRule::kSum;
  if (name == "mean") return UpdateRule::kMean;
  throw std::invalid_argument("unknown update rule: " + name);
}

ModelKind model_from_name(const std::string& name) {
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "mlp") return ModelKind::kMlp;
  throw std::invalid_argument("unknown model: " + name);
}

void parse_dataset(const json& j, SessionConfig& config) {
  SynthSpec& d = config.dataset;
  d.clusters = j.value("clusters", d.clusters);
  d.points_per_cluster = j.value("points_per_cluster", d.points_per_cluster);
  d.dim = j.value("dim", d.dim);
  d.cluster_std = j.value("cluster_std", d.cluster_std);
  d.centroid_scale = j.value("centroid_scale", d.centroid_scale);
  d.outliers = j.value("outliers", d.outliers);
  d.label_flip_prob = j.value("label_flip_prob", d.label_flip_prob);
  d.duplicate_target = j.value("duplicate_target", d.duplicate_target);
  config.dataset_seed = j.value("seed", config.dataset_seed);
}

void parse_trainer(const json& j, TrainerConfig& t) {
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.expected_batch = j.value("expected_batch", t.expected_batch);
  t.clip = j.value("clip", t.clip);
  t.noise_multiplier = j.value("noise_multiplier", t.noise_multiplier);
  t.steps = j.value("steps", t.steps);
  if (j.contains("update_rule"))
    t.rule = rule_from_name(j["update_rule"].get<std::string>());
  if (j.contains("model")) t.model = model_from_name(j["model"].get<std::string>());
  t.hidden_width = j.value("hidden_width", t.hidden_width);
  t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
  if (j.contains("tracked"))
    t.tracked_ids = j["tracked"].get<std::vector<std::string>>();
}

void parse_accounting(const json& j, AccountingSpec& a) {
  a.alpha = j.value("alpha", a.alpha);
  a.delta = j.value("delta", a.delta);
  a.runs = j.value("runs", a.runs);
  if (j.contains("p")) {
    if (j["p"].is_string()) {
      if (j["p"].get<std::string>() != "auto")
        throw std::invalid_argument("p must be a number or \"auto\"");
      a.p.reset();
    } else {
      a.p = j["p"].get<double>();
    }
  }
  if (j.contains("direction"))
    a.direction = direction_from_name(j["direction"].get<std::string>());
  if (j.contains("g_variant"))
    a.gp_variant = j["g_variant"].get<std::string>() == "statement"
                       ? GpVariant::kStatement
                       : GpVariant::kProof;
}

// Per-step bound for one trace record at the plan's order: the series value
// at the ceiled order.
double step_divergence(double order, double q, double delta, double sigma) {
  return sgm_rdp_bound(ceil_order(order), q, delta, sigma);
}

std::vector<json> read_json_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path.string());
  std::vector<json> lines;
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (raw.empty()) continue;
    try {
      lines.push_back(json::parse(raw));
    } catch (const json::parse_error& e) {
      throw SchemaError("malformed line " + std::to_string(number) + " in " +
                        path.string() + ": " + e.what());
    }
  }
  return lines;
}

}  // namespace

Direction direction_from_name(const std::string& name) {
  if (name == "forward") return Direction::kXprimeToX;
  if (name == "reverse") return Direction::kXToXprime;
  if (name == "max") return Direction::kMax;
  throw std::invalid_argument("unknown direction: " + name);
}

SessionConfig load_session_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw SchemaError("config " + path.string() + ": " + e.what());
  }
  SessionConfig config;
  if (j.contains("dataset")) parse_dataset(j["dataset"], config);
  if (j.contains("trainer")) parse_trainer(j["trainer"], config.trainer);
  if (j.contains("accounting")) parse_accounting(j["accounting"], config.accounting);
  return config;
}

Dataset session_dataset(const SessionConfig& config, DatasetVariant variant) {
  Dataset full = synth_dataset(config.dataset, config.dataset_seed);
  if (variant == DatasetVariant::kWithTarget) return full;
  if (!full.target_point_id)
    throw std::invalid_argument(
        "dataset has no target point; enable duplicate_target");
  return full.without_point(*full.target_point_id);
}

PointComposition compose_from_traces(std::span<const RunTrace> traces,
                                     const std::string& point_id,
                                     const AccountingSpec& spec,
                                     Direction direction) {
  if (traces.empty()) throw std::invalid_argument("no traces supplied");
  const int n = static_cast<int>(traces.front().steps.size());
  for (const RunTrace& t : traces)
    if (static_cast<int>(t.steps.size()) != n)
      throw SchemaError("runs disagree on the number of steps");
  const double q = traces.front().q;
  const double sigma = traces.front().sigma_effective;
  const double delta_max = traces.front().clip_bound;
  if (!(delta_max > 0.0))
    throw SchemaError("trace carries no clip bound; cannot form the baseline");

  const double p =
      spec.p.value_or(choose_p(n, spec.alpha, spec.gp_variant));
  CompositionPlan plan =
      CompositionPlan::make(n, spec.alpha, p, spec.gp_variant);

  auto delta_at = [&](const RunTrace& t, int step) {
    const StepRecord& s = t.steps[static_cast<std::size_t>(step - 1)];
    auto it = s.delta.find(point_id);
    if (it == s.delta.end())
      throw SchemaError("run " + t.run_id + " step " + std::to_string(step) +
                        " has no sensitivity for point " + point_id);
    return it->second;
  };

  const int runs = static_cast<int>(traces.size());
  StepSampleMatrix samples(runs, n);
  StepSampleMatrix base_samples(1, n);
  for (int step = 2; step <= n; ++step) {
    const double order = plan.order_for_step(step);
    for (int r = 0; r < runs; ++r) {
      const RunTrace& t = traces[static_cast<std::size_t>(r)];
      samples.set(r, step, order,
                  step_divergence(order, q, delta_at(t, step), sigma),
                  t.run_id + "#" + std::to_string(step - 1));
    }
    base_samples.set(0, step, order,
                     step_divergence(order, q, delta_max, sigma), "baseline");
  }

  // Step 1 is conditioned on the shared initialization; every run must
  // report the same sensitivity there.
  const double first_order = plan.order_for_step(1);
  const double delta_1 = delta_at(traces.front(), 1);
  for (const RunTrace& t : traces)
    if (std::abs(delta_at(t, 1) - delta_1) > 1e-12)
      throw SchemaError(
          "runs disagree on the first-step sensitivity; traces do not share "
          "an initialization");

  PointComposition pc{point_id, direction, plan, {}, {}};
  pc.ours = compose(plan, samples,
                    step_divergence(first_order, q, delta_1, sigma));
  pc.baseline = compose(plan, base_samples,
                        step_divergence(first_order, q, delta_max, sigma));
  return pc;
}

std::vector<ReportRow> composition_rows(const PointComposition& pc) {
  std::vector<ReportRow> rows;
  rows.reserve(pc.ours.per_step_contributions.size() + 1);
  for (std::size_t i = 0; i < pc.ours.per_step_contributions.size(); ++i) {
    ReportRow row = ReportRow::make(
        pc.point_id, std::to_string(i + 1), pc.ours.per_step_contributions[i],
        pc.baseline.per_step_contributions[i], pc.ours.estimator_ci[i]);
    rows.push_back(std::move(row));
  }
  double total_ci = 0.0;
  for (double c : pc.ours.estimator_ci) total_ci += c;
  rows.push_back(ReportRow::make(pc.point_id, "total", pc.ours.total_epsilon,
                                 pc.baseline.total_epsilon, total_ci));
  return rows;
}

MinibatchMeanSampler::MinibatchMeanSampler(const Dataset& dataset,
                                           const Model& model,
                                           std::vector<double> theta, double q,
                                           double clip)
    : dataset_(dataset), q_(q), param_dim_(model.param_count()) {
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("q must lie in [0, 1]");
  if (theta.size() != static_cast<std::size_t>(param_dim_))
    throw std::invalid_argument("checkpoint/model dimension mismatch");
  // Clipped per-point gradients are fixed given the checkpoint; minibatch
  // draws then reduce to subset averaging.
  clipped_grads_.resize(dataset.points.size() *
                        static_cast<std::size_t>(param_dim_));
  for (std::size_t i = 0; i < dataset.points.size(); ++i) {
    const std::vector<double> g =
        clip_grad(model.grad(theta, dataset.points[i]), clip);
    std::copy(g.begin(), g.end(),
              clipped_grads_.begin() + static_cast<std::ptrdiff_t>(
                                           i * static_cast<std::size_t>(param_dim_)));
  }
}

int MinibatchMeanSampler::dim() const { return param_dim_; }

UpdateVector MinibatchMeanSampler::draw(Rng& rng) {
  UpdateVector u(static_cast<std::size_t>(param_dim_), 0.0);
  int count = 0;
  for (std::size_t i = 0; i < dataset_.points.size(); ++i) {
    if (!rng.bernoulli(q_)) continue;
    ++count;
    const double* g =
        clipped_grads_.data() + i * static_cast<std::size_t>(param_dim_);
    for (int d = 0; d < param_dim_; ++d)
      u[static_cast<std::size_t>(d)] += g[d];
  }
  if (count > 0) scale(u, 1.0 / count);
  return u;
}

void cmd_simulate(const SessionConfig& config, DatasetVariant variant,
                  int runs, std::uint64_t seed,
                  const std::filesystem::path& out) {
  // Tracked points resolve against the full dataset so X-runs still record
  // the target's sensitivity (accounting needs only checkpoints and x*).
  const Dataset full = session_dataset(config, DatasetVariant::kWithTarget);
  TrainerConfig trainer = config.trainer;
  if (trainer.tracked_ids.empty()) {
    if (full.target_point_id)
      trainer.tracked_ids.push_back(*full.target_point_id);
    for (std::size_t i = 0; i < full.ids.size() && i < 8; ++i)
      trainer.tracked_ids.push_back(full.ids[i]);
  }
  const std::vector<TrackedPoint> tracked =
      resolve_tracked(full, trainer.tracked_ids);
  const Dataset dataset = variant == DatasetVariant::kWithTarget
                              ? full
                              : session_dataset(config, variant);
  const std::vector<RunTrace> traces =
      multi_run(dataset, trainer, runs, seed, tracked);
  write_run_traces(traces, out);
}

void cmd_account(const std::filesystem::path& traces_path, int alpha,
                 std::optional<double> clip_override,
                 const std::filesystem::path& out, ReportFormat format) {
  const std::vector<TraceRecord> records = read_trace(traces_path);
  if (records.empty()) throw SchemaError("trace has no sensitivity records");

  std::map<std::string, double> clip_by_run;
  for (const RunTrace& t : read_run_traces(traces_path))
    if (t.clip_bound > 0.0) clip_by_run[t.run_id] = t.clip_bound;

  std::vector<ReportRow> rows;
  rows.reserve(records.size());
  for (const TraceRecord& r : records) {
    double delta_max;
    if (clip_override) {
      delta_max = *clip_override;
    } else {
      auto it = clip_by_run.find(r.run_id);
      if (it == clip_by_run.end())
        throw SchemaError("no clip bound for run " + r.run_id +
                          "; pass --clip for record-only traces");
      delta_max = it->second;
    }
    const double ours =
        sgm_rdp_bound(ceil_order(alpha), r.q, r.delta, r.sigma_effective);
    const double base =
        sgm_rdp_bound(ceil_order(alpha), r.q, delta_max, r.sigma_effective);
    rows.push_back(ReportRow::make(r.run_id + "/" + r.point_id,
                                   std::to_string(r.step), ours, base, 0.0));
  }
  write_report(rows, out, format);
}

void cmd_compose(const std::filesystem::path& traces_x,
                 const std::filesystem::path& traces_xprime,
                 const AccountingSpec& spec, const std::filesystem::path& out,
                 ReportFormat format) {
  std::vector<RunTrace> x_runs, xprime_runs;
  if (spec.direction != Direction::kXprimeToX)
    x_runs = read_run_traces(traces_x);
  if (spec.direction != Direction::kXToXprime)
    xprime_runs = read_run_traces(traces_xprime);

  // Points present in every consumed run.
  std::set<std::string> points;
  bool first = true;
  for (const std::vector<RunTrace>* runs : {&x_runs, &xprime_runs}) {
    for (const RunTrace& t : *runs) {
      std::set<std::string> here;
      for (const StepRecord& s : t.steps)
        for (const auto& [id, unused] : s.delta) here.insert(id);
      if (first) {
        points = std::move(here);
        first = false;
      } else {
        std::set<std::string> kept;
        std::set_intersection(points.begin(), points.end(), here.begin(),
                              here.end(), std::inserter(kept, kept.begin()));
        points = std::move(kept);
      }
    }
  }
  if (points.empty()) throw SchemaError("traces share no tracked points");

  std::vector<ReportRow> rows;
  for (const std::string& point : points) {
    std::optional<PointComposition> forward, reverse;
    if (!xprime_runs.empty())
      forward = compose_from_traces(xprime_runs, point, spec,
                                    Direction::kXprimeToX);
    if (!x_runs.empty())
      reverse =
          compose_from_traces(x_runs, point, spec, Direction::kXToXprime);

    const PointComposition* chosen = nullptr;
    if (spec.direction == Direction::kMax) {
      if (!forward || !reverse)
        throw SchemaError("direction max needs traces for both datasets");
      // The per-instance guarantee is the max of the two totals; the
      // per-step breakdown shown is the attaining direction's.
      chosen = forward->ours.total_epsilon >= reverse->ours.total_epsilon
                   ? &*forward
                   : &*reverse;
    } else {
      if (!forward && !reverse)
        throw SchemaError("no traces available for the requested direction");
      chosen = forward ? &*forward : &*reverse;
    }
    for (ReportRow& row : composition_rows(*chosen)) rows.push_back(row);
  }
  write_report(rows, out, format);
}

void cmd_general_bound(const SessionConfig& config,
                       const std::filesystem::path& traces_path, int m_outer,
                       int m_inner, std::uint64_t seed,
                       const std::filesystem::path& out, ReportFormat format) {
  const Dataset xprime = session_dataset(config, DatasetVariant::kWithTarget);
  const Dataset x = session_dataset(config, DatasetVariant::kWithoutTarget);
  const Model model = Model::for_config(xprime.dim(), config.trainer);

  const std::vector<RunTrace> traces = read_run_traces(traces_path);
  if (traces.empty() || traces.front().checkpoints.empty())
    throw SchemaError("trace carries no checkpoints");

  const double q = std::min(
      1.0, static_cast<double>(config.trainer.expected_batch) /
               static_cast<double>(xprime.points.size()));
  const double sigma = config.trainer.noise_multiplier * config.trainer.clip;
  const int alpha = ceil_order(config.accounting.alpha);
  const double baseline = sgm_rdp_bound(alpha, q, config.trainer.clip, sigma);

  std::vector<ReportRow> rows;
  for (const Checkpoint& ckpt : traces.front().checkpoints) {
    if (ckpt.theta.size() != static_cast<std::size_t>(model.param_count()))
      throw SchemaError("checkpoint at step " + std::to_string(ckpt.step) +
                        " does not match the configured model");
    MinibatchMeanSampler sampler_x(x, model, ckpt.theta, q,
                                   config.trainer.clip);
    MinibatchMeanSampler sampler_xprime(xprime, model, ckpt.theta, q,
                                        config.trainer.clip);
    const GeneralBound bound = per_instance_bound_general(
        sampler_x, sampler_xprime, alpha, sigma, m_outer, m_inner,
        derive_seed(seed, static_cast<std::uint64_t>(ckpt.step)));
    double eps;
    double ci;
    switch (config.accounting.direction) {
      case Direction::kXprimeToX:
        eps = bound.xprime_to_x.epsilon;
        ci = bound.xprime_to_x.ci_halfwidth;
        break;
      case Direction::kXToXprime:
        eps = bound.x_to_xprime.epsilon;
        ci = bound.x_to_xprime.ci_halfwidth;
        break;
      default:
        eps = bound.bound.epsilon;
        ci = std::max(bound.xprime_to_x.ci_halfwidth,
                      bound.x_to_xprime.ci_halfwidth);
    }
    rows.push_back(ReportRow::make(
        xprime.target_point_id.value_or("target"),
        std::to_string(ckpt.step), eps, baseline, ci));
  }
  write_report(rows, out, format);
}

void cmd_unlearn(const std::filesystem::path& stream, double beta, int alpha,
                 NpiuCoefficient coefficient,
                 const std::filesystem::path& out, ReportFormat format) {
  std::vector<RequestDivergences> requests;
  int line = 0;
  for (const json& j : read_json_lines(stream)) {
    ++line;
    RequestDivergences r;
    if (!j.contains("d_high") || !j.contains("d_step"))
      throw SchemaError("unlearning request on line " + std::to_string(line) +
                        " must carry d_high and d_step");
    try {
      r.d_high = j["d_high"].get<double>();
      r.d_step = j["d_step"].get<double>();
      if (j.contains("max_order")) r.max_order = j["max_order"].get<double>();
    } catch (const json::exception& e) {
      throw SchemaError("unlearning request on line " + std::to_string(line) +
                        ": " + e.what());
    }
    requests.push_back(r);
  }

  UnlearningLedger ledger(beta, alpha, coefficient);
  const std::vector<LedgerEntry> log =
      simulate_request_stream(ledger, requests);

  std::vector<ReportRow> rows;
  rows.reserve(log.size());
  for (const LedgerEntry& e : log) {
    rows.push_back(ReportRow::make(
        std::string("request-") + std::to_string(e.request_index) +
            (e.keep ? "/keep" : "/retrain"),
        std::to_string(e.request_index), e.served_bound, beta, 0.0));
  }
  write_report(rows, out, format);
}

}  // namespace pidp
