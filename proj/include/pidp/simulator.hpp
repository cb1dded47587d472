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

#ifndef PIDP_SIMULATOR_HPP_
#define PIDP_SIMULATOR_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pidp/rng.hpp"

namespace pidp {

struct DataPoint {
  std::vector<double> x;
  int label = 0;  // binary, 0/1
};

struct Dataset {
  std::vector<DataPoint> points;
  std::vector<std::string> ids;
  std::optional<std::string> target_point_id;  // the tracked x*

  int dim() const;
  int index_of(const std::string& id) const;  // -1 when absent
  // The neighbouring dataset X = X' \ {id}; target_point_id is cleared.
  Dataset without_point(const std::string& id) const;
  void validate() const;
};

struct SynthSpec {
  int clusters = 2;
  int points_per_cluster = 100;
  int dim = 2;
  double cluster_std = 0.8;
  double centroid_scale = 3.0;  // centroid norm
  int outliers = 0;             // planted points >= 10 stds from every centroid
  double label_flip_prob = 0.0;
  // Append a copy of the first cluster's centroid as tracked target x*
  // (a point with many near-duplicate neighbours).
  bool duplicate_target = false;
};

// Reproducible Gaussian-cluster dataset; labels follow cluster parity, then
// optional independent flips. Outliers get ids "outlier<k>" and carry the
// label opposite to their nearest cluster so they stay hard to fit; the
// duplicated target gets id "target".
Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed);

enum class UpdateRule { kSum, kMean };
enum class ModelKind { kLogistic, kMlp };

const char* update_rule_name(UpdateRule r);
const char* model_kind_name(ModelKind m);

struct TrainerConfig {
  double learning_rate = 0.5;
  int expected_batch = 128;  // L
  double clip = 1.0;         // C
  double noise_multiplier = 1.0;
  int steps = 10;
  UpdateRule rule = UpdateRule::kSum;
  std::uint64_t seed = 1;
  // Initialization stream; defaults to `seed`. multi_run points every run
  // at the same init draw while batch/noise streams stay per-run.
  std::optional<std::uint64_t> init_seed;
  ModelKind model = ModelKind::kLogistic;
  int hidden_width = 16;
  int checkpoint_every = 1;
  std::vector<std::string> tracked_ids;

  void validate() const;
};

// Tiny analytic-gradient models (logistic regression / one-hidden-layer
// tanh MLP); hand-coded gradients keep the runs exactly reproducible.
class Model {
 public:
  static Model logistic(int dim);
  static Model mlp(int dim, int hidden_width);
  static Model for_config(int dim, const TrainerConfig& config);

  int param_count() const;
  std::vector<double> init_params(Rng& rng) const;
  double loss(std::span<const double> theta, const DataPoint& p) const;
  std::vector<double> grad(std::span<const double> theta,
                           const DataPoint& p) const;
  int classify(std::span<const double> theta, const DataPoint& p) const;

 private:
  Model(ModelKind kind, int dim, int hidden);
  double forward(std::span<const double> theta, const DataPoint& p,
                 std::vector<double>* hidden_out) const;

  ModelKind kind_;
  int dim_;
  int hidden_;
};

// Each index included independently with probability q.
std::vector<int> poisson_minibatch(const Dataset& dataset, double q, Rng& rng);

// g / max(1, ||g|| / C).
std::vector<double> clip_grad(std::span<const double> g, double clip);

// (1/L) sum of clipped gradients; empty batch gives the zero vector.
std::vector<double> sum_update(std::span<const std::vector<double>> grads,
                               double clip, double normalizer, int dim);
// (1/|B|) sum of clipped gradients; empty batch gives the zero vector.
std::vector<double> mean_update(std::span<const std::vector<double>> grads,
                                double clip, int dim);

struct StepRecord {
  int step = 0;  // 1-based
  int batch_size = 0;
  // Normalized per-tracked-point sensitivity (sum rule only).
  std::map<std::string, double> delta;
};

// A point whose sensitivity is recorded at every step. It does not have to
// belong to the training dataset: per-instance accounting for x* against
// X-runs tracks a point the run never samples.
struct TrackedPoint {
  std::string id;
  DataPoint point;
};

// Looks ids up in the dataset; throws std::invalid_argument on a miss.
std::vector<TrackedPoint> resolve_tracked(const Dataset& dataset,
                                          std::span<const std::string> ids);

struct Checkpoint {
  std::vector<double> theta;
  int step = 0;  // parameters after this many steps; 0 is the init
  std::string run_id;
  std::uint64_t rng_cursor = 0;  // derived seed of the next step
};

struct RunTrace {
  std::string run_id;
  double q = 0.0;
  double sigma_effective = 0.0;  // noise std in the recorded delta's space
  double clip_bound = 0.0;       // max recordable delta in that space
  UpdateRule rule = UpdateRule::kSum;
  std::vector<StepRecord> steps;
  std::vector<Checkpoint> checkpoints;
};

// One DP-SGD update from theta: Poisson batch, clip, sum/mean update,
// Gaussian noise N(0, (noise_multiplier * C)^2) in un-normalized update
// space, then the learning-rate (and 1/L for the sum rule) scaling. The
// record captures the realized batch and the tracked points' sensitivities
// at theta. Throws NumericError if parameters leave the finite range.
std::pair<std::vector<double>, StepRecord> dpsgd_step(
    std::span<const double> theta, const Dataset& dataset,
    const TrainerConfig& config, const Model& model, Rng& rng,
    std::span<const TrackedPoint> tracked = {});

// Sum rule: min(||grad||, C) / L (the paired noise std is
// noise_multiplier * C / L). The mean rule has no per-point constant here;
// it goes through the general-update path. Throws std::invalid_argument.
double per_point_sensitivity(std::span<const double> theta,
                             const DataPoint& point, double clip,
                             double normalizer, UpdateRule rule,
                             const Model& model);

// When `tracked` is empty the config's tracked_ids are resolved against the
// dataset (ids absent from it are skipped).
RunTrace train_run(const Dataset& dataset, const TrainerConfig& config,
                   std::span<const TrackedPoint> tracked = {});

// R runs sharing one initialization draw, with independent batch/noise
// streams seeded seed_base + r.
std::vector<RunTrace> multi_run(const Dataset& dataset,
                                const TrainerConfig& config, int R,
                                std::uint64_t seed_base,
                                std::span<const TrackedPoint> tracked = {});

}  // namespace pidp

#endif  // PIDP_SIMULATOR_HPP_
