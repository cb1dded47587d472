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

#include "pidp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pidp/errors.hpp"
#include "pidp/vec.hpp"

namespace pidp {
namespace {

// Seed-stream tags.
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kStepStream = 0x73746570;
constexpr std::uint64_t kDataStream = 0x64617461;

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

int Dataset::dim() const { return points.empty() ? 0 : static_cast<int>(points.front().x.size()); }

int Dataset::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return static_cast<int>(i);
  return -1;
}

Dataset Dataset::without_point(const std::string& id) const {
  const int idx = index_of(id);
  if (idx < 0) throw std::invalid_argument("no point with id " + id);
  Dataset out;
  out.points.reserve(points.size() - 1);
  out.ids.reserve(ids.size() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (static_cast<int>(i) == idx) continue;
    out.points.push_back(points[i]);
    out.ids.push_back(ids[i]);
  }
  return out;
}

void Dataset::validate() const {
  if (points.size() != ids.size())
    throw std::invalid_argument("ids and points must align");
  std::vector<std::string> sorted(ids);
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("point ids must be unique");
  for (const auto& p : points)
    if (static_cast<int>(p.x.size()) != dim())
      throw std::invalid_argument("feature dimensions must be uniform");
}

Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.clusters < 1 || spec.points_per_cluster < 1 || spec.dim < 1)
    throw std::invalid_argument("dataset spec counts must be positive");
  Rng rng(derive_seed(seed, kDataStream));

  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(spec.clusters));
  for (int c = 0; c < spec.clusters; ++c) {
    std::vector<double> mu(static_cast<std::size_t>(spec.dim));
    for (double& v : mu) v = rng.normal();
    const double norm = l2_norm(mu);
    if (norm > 0.0) scale(mu, spec.centroid_scale / norm);
    centroids.push_back(std::move(mu));
  }

  Dataset ds;
  int serial = 0;
  for (int c = 0; c < spec.clusters; ++c) {
    for (int i = 0; i < spec.points_per_cluster; ++i) {
      DataPoint p;
      p.x.resize(static_cast<std::size_t>(spec.dim));
      for (int d = 0; d < spec.dim; ++d)
        p.x[static_cast<std::size_t>(d)] =
            centroids[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] +
            spec.cluster_std * rng.normal();
      p.label = c % 2;
      if (spec.label_flip_prob > 0.0 && rng.bernoulli(spec.label_flip_prob))
        p.label = 1 - p.label;
      ds.points.push_back(std::move(p));
      ds.ids.push_back("p" + std::to_string(serial++));
    }
  }

  double max_centroid_norm = 0.0;
  for (const auto& mu : centroids)
    max_centroid_norm = std::max(max_centroid_norm, l2_norm(mu));
  for (int k = 0; k < spec.outliers; ++k) {
    std::vector<double> dir(static_cast<std::size_t>(spec.dim));
    for (double& v : dir) v = rng.normal();
    const double norm = l2_norm(dir);
    if (norm > 0.0) scale(dir, 1.0 / norm);
    DataPoint p;
    p.x.resize(static_cast<std::size_t>(spec.dim));
    const double radius = max_centroid_norm + 12.0 * spec.cluster_std;
    for (int d = 0; d < spec.dim; ++d)
      p.x[static_cast<std::size_t>(d)] = radius * dir[static_cast<std::size_t>(d)];
    // Label against the nearest cluster so the point never fits.
    double best = -1.0;
    int nearest = 0;
    for (int c = 0; c < spec.clusters; ++c) {
      double dist = 0.0;
      for (int d = 0; d < spec.dim; ++d) {
        const double diff = p.x[static_cast<std::size_t>(d)] -
                            centroids[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)];
        dist += diff * diff;
      }
      if (best < 0.0 || dist < best) {
        best = dist;
        nearest = c;
      }
    }
    p.label = 1 - nearest % 2;
    ds.points.push_back(std::move(p));
    ds.ids.push_back("outlier" + std::to_string(k));
  }

  if (spec.duplicate_target) {
    DataPoint p;
    p.x = centroids.front();
    p.label = 0;
    ds.points.push_back(std::move(p));
    ds.ids.push_back("target");
    ds.target_point_id = "target";
  }
  ds.validate();
  return ds;
}

const char* update_rule_name(UpdateRule r) {
  return r == UpdateRule::kSum ? "sum" : "mean";
}

const char* model_kind_name(ModelKind m) {
  return m == ModelKind::kLogistic ? "logistic" : "mlp";
}

void TrainerConfig::validate() const {
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("learning_rate must be positive");
  if (expected_batch < 1)
    throw std::invalid_argument("expected_batch must be positive");
  if (!(clip > 0.0)) throw std::invalid_argument("clip must be positive");
  if (!(noise_multiplier >= 0.0))
    throw std::invalid_argument("noise_multiplier must be nonnegative");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (model == ModelKind::kMlp && (hidden_width < 1 || hidden_width > 64))
    throw std::invalid_argument("hidden width must lie in [1, 64]");
  if (checkpoint_every < 1)
    throw std::invalid_argument("checkpoint_every must be >= 1");
}

Model::Model(ModelKind kind, int dim, int hidden)
    : kind_(kind), dim_(dim), hidden_(hidden) {
  if (dim < 1) throw std::invalid_argument("model dimension must be positive");
}

Model Model::logistic(int dim) { return Model(ModelKind::kLogistic, dim, 0); }

Model Model::mlp(int dim, int hidden_width) {
  if (hidden_width < 1 || hidden_width > 64)
    throw std::invalid_argument("hidden width must lie in [1, 64]");
  return Model(ModelKind::kMlp, dim, hidden_width);
}

Model Model::for_config(int dim, const TrainerConfig& config) {
  return config.model == ModelKind::kLogistic
             ? logistic(dim)
             : mlp(dim, config.hidden_width);
}

int Model::param_count() const {
  if (kind_ == ModelKind::kLogistic) return dim_ + 1;
  // W1 (h x d), b1 (h), w2 (h), b2.
  return hidden_ * dim_ + hidden_ + hidden_ + 1;
}

std::vector<double> Model::init_params(Rng& rng) const {
  std::vector<double> theta(static_cast<std::size_t>(param_count()));
  const double s = kind_ == ModelKind::kLogistic
                       ? 0.1
                       : 1.0 / std::sqrt(static_cast<double>(dim_));
  for (double& v : theta) v = s * rng.normal();
  return theta;
}

// Returns the pre-sigmoid logit; fills the hidden activations when asked.
double Model::forward(std::span<const double> theta, const DataPoint& p,
                      std::vector<double>* hidden_out) const {
  if (kind_ == ModelKind::kLogistic) {
    double z = theta[static_cast<std::size_t>(dim_)];
    for (int d = 0; d < dim_; ++d)
      z += theta[static_cast<std::size_t>(d)] * p.x[static_cast<std::size_t>(d)];
    return z;
  }
  const double* w1 = theta.data();
  const double* b1 = theta.data() + hidden_ * dim_;
  const double* w2 = b1 + hidden_;
  const double b2 = *(w2 + hidden_);
  double z = b2;
  if (hidden_out) hidden_out->resize(static_cast<std::size_t>(hidden_));
  for (int h = 0; h < hidden_; ++h) {
    double a = b1[h];
    for (int d = 0; d < dim_; ++d) a += w1[h * dim_ + d] * p.x[static_cast<std::size_t>(d)];
    const double t = std::tanh(a);
    if (hidden_out) (*hidden_out)[static_cast<std::size_t>(h)] = t;
    z += w2[h] * t;
  }
  return z;
}

double Model::loss(std::span<const double> theta, const DataPoint& p) const {
  const double z = forward(theta, p, nullptr);
  // Cross-entropy, stable form: ln(1 + e^z) - y z.
  const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z))
                                  : std::log1p(std::exp(z));
  return softplus - p.label * z;
}

std::vector<double> Model::grad(std::span<const double> theta,
                                const DataPoint& p) const {
  std::vector<double> g(theta.size(), 0.0);
  if (kind_ == ModelKind::kLogistic) {
    const double r = sigmoid(forward(theta, p, nullptr)) - p.label;
    for (int d = 0; d < dim_; ++d)
      g[static_cast<std::size_t>(d)] = r * p.x[static_cast<std::size_t>(d)];
    g[static_cast<std::size_t>(dim_)] = r;
    return g;
  }
  std::vector<double> hidden;
  const double z = forward(theta, p, &hidden);
  const double r = sigmoid(z) - p.label;
  const double* w2 = theta.data() + hidden_ * dim_ + hidden_;
  double* g_w1 = g.data();
  double* g_b1 = g.data() + hidden_ * dim_;
  double* g_w2 = g_b1 + hidden_;
  double* g_b2 = g_w2 + hidden_;
  *g_b2 = r;
  for (int h = 0; h < hidden_; ++h) {
    const double t = hidden[static_cast<std::size_t>(h)];
    g_w2[h] = r * t;
    const double back = r * w2[h] * (1.0 - t * t);
    g_b1[h] = back;
    for (int d = 0; d < dim_; ++d)
      g_w1[h * dim_ + d] = back * p.x[static_cast<std::size_t>(d)];
  }
  return g;
}

int Model::classify(std::span<const double> theta, const DataPoint& p) const {
  return forward(theta, p, nullptr) >= 0.0 ? 1 : 0;
}

std::vector<int> poisson_minibatch(const Dataset& dataset, double q, Rng& rng) {
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("q must lie in [0, 1]");
  std::vector<int> batch;
  for (std::size_t i = 0; i < dataset.points.size(); ++i)
    if (rng.bernoulli(q)) batch.push_back(static_cast<int>(i));
  return batch;
}

std::vector<double> clip_grad(std::span<const double> g, double clip) {
  if (!(clip > 0.0)) throw std::invalid_argument("clip must be positive");
  std::vector<double> out(g.begin(), g.end());
  const double norm = l2_norm(g);
  if (norm > clip) scale(out, clip / norm);
  return out;
}

std::vector<double> sum_update(std::span<const std::vector<double>> grads,
                               double clip, double normalizer, int dim) {
  std::vector<double> u = zeros(static_cast<std::size_t>(dim));
  for (const auto& g : grads) axpy(1.0, clip_grad(g, clip), u);
  scale(u, 1.0 / normalizer);
  return u;
}

std::vector<double> mean_update(std::span<const std::vector<double>> grads,
                                double clip, int dim) {
  std::vector<double> u = zeros(static_cast<std::size_t>(dim));
  if (grads.empty()) return u;
  for (const auto& g : grads) axpy(1.0, clip_grad(g, clip), u);
  scale(u, 1.0 / static_cast<double>(grads.size()));
  return u;
}

std::vector<TrackedPoint> resolve_tracked(const Dataset& dataset,
                                          std::span<const std::string> ids) {
  std::vector<TrackedPoint> tracked;
  tracked.reserve(ids.size());
  for (const std::string& id : ids) {
    const int idx = dataset.index_of(id);
    if (idx < 0) throw std::invalid_argument("no point with id " + id);
    tracked.push_back(
        TrackedPoint{id, dataset.points[static_cast<std::size_t>(idx)]});
  }
  return tracked;
}

std::pair<std::vector<double>, StepRecord> dpsgd_step(
    std::span<const double> theta, const Dataset& dataset,
    const TrainerConfig& config, const Model& model, Rng& rng,
    std::span<const TrackedPoint> tracked) {
  config.validate();
  const double q =
      std::min(1.0, static_cast<double>(config.expected_batch) /
                        static_cast<double>(dataset.points.size()));
  StepRecord record;

  // Sensitivities are measured at the incoming checkpoint; tracked points
  // need not belong to the dataset being trained on.
  if (config.rule == UpdateRule::kSum) {
    for (const TrackedPoint& tp : tracked)
      record.delta[tp.id] = per_point_sensitivity(
          theta, tp.point, config.clip, config.expected_batch, config.rule,
          model);
  }

  const std::vector<int> batch = poisson_minibatch(dataset, q, rng);
  record.batch_size = static_cast<int>(batch.size());

  std::vector<std::vector<double>> grads;
  grads.reserve(batch.size());
  for (int idx : batch)
    grads.push_back(
        model.grad(theta, dataset.points[static_cast<std::size_t>(idx)]));

  const int dim = static_cast<int>(theta.size());
  std::vector<double> update =
      config.rule == UpdateRule::kSum
          ? sum_update(grads, config.clip, config.expected_batch, dim)
          : mean_update(grads, config.clip, dim);

  // Noise N(0, sigma^2 C^2) in un-normalized update space; the sum rule's
  // 1/L rides along with the update normalization.
  const double noise_std = config.noise_multiplier * config.clip;
  const double noise_scale =
      config.rule == UpdateRule::kSum
          ? noise_std / static_cast<double>(config.expected_batch)
          : noise_std;

  std::vector<double> next(theta.begin(), theta.end());
  for (int d = 0; d < dim; ++d) {
    const double noisy = update[static_cast<std::size_t>(d)] +
                         noise_scale * rng.normal();
    next[static_cast<std::size_t>(d)] -= config.learning_rate * noisy;
    if (!std::isfinite(next[static_cast<std::size_t>(d)]))
      throw NumericError("parameters diverged at coordinate " +
                         std::to_string(d));
  }
  return {std::move(next), std::move(record)};
}

double per_point_sensitivity(std::span<const double> theta,
                             const DataPoint& point, double clip,
                             double normalizer, UpdateRule rule,
                             const Model& model) {
  if (rule == UpdateRule::kMean)
    throw std::invalid_argument(
        "mean-rule sensitivity has no per-point constant; use the "
        "general-update bound");
  if (theta.size() != static_cast<std::size_t>(model.param_count()))
    throw std::invalid_argument("checkpoint/model dimension mismatch");
  const double norm = l2_norm(model.grad(theta, point));
  return std::min(norm, clip) / normalizer;
}

RunTrace train_run(const Dataset& dataset, const TrainerConfig& config,
                   std::span<const TrackedPoint> tracked) {
  config.validate();
  dataset.validate();
  const Model model = Model::for_config(dataset.dim(), config);

  // Default tracked set: the config's ids that exist in this dataset.
  std::vector<TrackedPoint> resolved;
  if (tracked.empty()) {
    for (const std::string& id : config.tracked_ids) {
      const int idx = dataset.index_of(id);
      if (idx < 0) continue;
      resolved.push_back(
          TrackedPoint{id, dataset.points[static_cast<std::size_t>(idx)]});
    }
    tracked = resolved;
  }

  RunTrace trace;
  trace.run_id = "run-" + std::to_string(config.seed);
  trace.q = std::min(1.0, static_cast<double>(config.expected_batch) /
                              static_cast<double>(dataset.points.size()));
  trace.rule = config.rule;
  if (config.rule == UpdateRule::kSum) {
    trace.sigma_effective = config.noise_multiplier * config.clip /
                            static_cast<double>(config.expected_batch);
    trace.clip_bound =
        config.clip / static_cast<double>(config.expected_batch);
  } else {
    trace.sigma_effective = config.noise_multiplier * config.clip;
    trace.clip_bound = config.clip;
  }

  Rng init_rng(derive_seed(config.init_seed.value_or(config.seed), kInitStream));
  std::vector<double> theta = model.init_params(init_rng);
  trace.checkpoints.push_back(
      Checkpoint{theta, 0, trace.run_id, derive_seed(config.seed, kStepStream, 1)});

  for (int t = 1; t <= config.steps; ++t) {
    Rng step_rng(derive_seed(config.seed, kStepStream, static_cast<std::uint64_t>(t)));
    auto [next, record] =
        dpsgd_step(theta, dataset, config, model, step_rng, tracked);
    record.step = t;
    trace.steps.push_back(std::move(record));
    theta = std::move(next);
    if (t % config.checkpoint_every == 0 || t == config.steps)
      trace.checkpoints.push_back(Checkpoint{
          theta, t, trace.run_id,
          derive_seed(config.seed, kStepStream, static_cast<std::uint64_t>(t) + 1)});
  }
  return trace;
}

std::vector<RunTrace> multi_run(const Dataset& dataset,
                                const TrainerConfig& config, int R,
                                std::uint64_t seed_base,
                                std::span<const TrackedPoint> tracked) {
  if (R < 1) throw std::invalid_argument("R must be >= 1");
  std::vector<RunTrace> traces;
  traces.reserve(static_cast<std::size_t>(R));
  std::string first_error;
  for (int r = 0; r < R; ++r) {
    TrainerConfig run_config = config;
    run_config.seed = seed_base + static_cast<std::uint64_t>(r);
    run_config.init_seed = config.init_seed.value_or(seed_base);
    try {
      traces.push_back(train_run(dataset, run_config, tracked));
    } catch (const NumericError& e) {
      // A diverged run must not abort its siblings; surface afterwards.
      if (first_error.empty())
        first_error = "run " + std::to_string(r) + ": " + e.what();
    }
  }
  if (traces.empty() && !first_error.empty()) throw NumericError(first_error);
  return traces;
}

}  // namespace pidp
