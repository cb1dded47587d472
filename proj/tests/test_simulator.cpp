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

#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "pidp/simulator.hpp"
#include "pidp/vec.hpp"

using namespace pidp;

namespace {

SynthSpec small_spec() {
  SynthSpec spec;
  spec.clusters = 2;
  spec.points_per_cluster = 50;
  spec.dim = 2;
  spec.outliers = 0;
  return spec;
}

// Central finite differences of the loss.
std::vector<double> fd_grad(const Model& model, std::vector<double> theta,
                            const DataPoint& p) {
  std::vector<double> g(theta.size());
  const double h = 1e-5;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double up = model.loss(theta, p);
    theta[i] = saved - h;
    const double down = model.loss(theta, p);
    theta[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

void check_grad(const Model& model, Rng& rng, const DataPoint& p) {
  std::vector<double> theta = model.init_params(rng);
  for (double& t : theta) t += 0.3 * rng.normal();
  const std::vector<double> analytic = model.grad(theta, p);
  const std::vector<double> numeric = fd_grad(model, theta, p);
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    norm += numeric[i] * numeric[i];
  }
  CHECK(std::sqrt(diff) <= 1e-5 * std::max(1.0, std::sqrt(norm)));
}

}  // namespace

TEST_CASE("synth_dataset determinism and structure") {
  const Dataset a = synth_dataset(small_spec(), 11);
  const Dataset b = synth_dataset(small_spec(), 11);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].x == b.points[i].x);
    CHECK(a.points[i].label == b.points[i].label);
  }
  CHECK(a.points.size() == 100);
  CHECK_FALSE(a.target_point_id.has_value());

  const Dataset c = synth_dataset(small_spec(), 12);
  CHECK(c.points.front().x != a.points.front().x);
}

TEST_CASE("outlier is planted far from every cluster") {
  SynthSpec spec = small_spec();
  spec.outliers = 1;
  const Dataset ds = synth_dataset(spec, 5);
  const int idx = ds.index_of("outlier0");
  REQUIRE(idx >= 0);
  const auto& out = ds.points[static_cast<std::size_t>(idx)].x;
  // At least 10 cluster stds from every other point (so from every
  // centroid too).
  for (std::size_t i = 0; i < ds.points.size(); ++i) {
    if (static_cast<int>(i) == idx) continue;
    double d2 = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double diff = out[k] - ds.points[i].x[k];
      d2 += diff * diff;
    }
    CHECK(std::sqrt(d2) >= 10.0 * spec.cluster_std);
  }
}

TEST_CASE("duplicate target is tracked and removable") {
  SynthSpec spec = small_spec();
  spec.duplicate_target = true;
  const Dataset xprime = synth_dataset(spec, 3);
  REQUIRE(xprime.target_point_id.has_value());
  CHECK(xprime.index_of("target") >= 0);
  const Dataset x = xprime.without_point("target");
  CHECK(x.points.size() + 1 == xprime.points.size());
  CHECK(x.index_of("target") < 0);
}

TEST_CASE("poisson_minibatch") {
  const Dataset ds = synth_dataset(small_spec(), 1);
  Rng rng(9);
  CHECK(poisson_minibatch(ds, 0.0, rng).empty());
  CHECK(poisson_minibatch(ds, 1.0, rng).size() == ds.points.size());

  // Mean batch size within 3 binomial sigmas over many draws.
  const double q = 0.2;
  const int draws = 2000;
  double total = 0.0;
  for (int i = 0; i < draws; ++i)
    total += static_cast<double>(poisson_minibatch(ds, q, rng).size());
  const double n = static_cast<double>(ds.points.size());
  const double mean = total / draws;
  const double se = std::sqrt(n * q * (1.0 - q) / draws);
  CHECK(std::abs(mean - n * q) <= 3.0 * se);
}

TEST_CASE("clip_grad") {
  const std::vector<double> small_g = {0.3, 0.4};  // norm 0.5
  CHECK(clip_grad(small_g, 1.0) == small_g);

  const std::vector<double> big = {3.0, 4.0};  // norm 5
  const std::vector<double> clipped = clip_grad(big, 2.5);
  CHECK(l2_norm(clipped) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(clipped[0] / clipped[1] == doctest::Approx(0.75).epsilon(1e-12));

  const std::vector<double> zero = {0.0, 0.0};
  CHECK(clip_grad(zero, 1.0) == zero);
}

TEST_CASE("sum and mean updates") {
  std::vector<std::vector<double>> one = {{1.0, 0.0}};  // norm 1 = C
  CHECK(l2_norm(sum_update(one, 1.0, 128.0, 2)) ==
        doctest::Approx(1.0 / 128.0).epsilon(1e-12));

  std::vector<std::vector<double>> two = {{0.3, 0.4}, {0.3, 0.4}};
  const std::vector<double> m = mean_update(two, 1.0, 2);
  CHECK(m[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(m[1] == doctest::Approx(0.4).epsilon(1e-12));

  std::vector<std::vector<double>> empty;
  CHECK(sum_update(empty, 1.0, 128.0, 2) == std::vector<double>{0.0, 0.0});
  CHECK(mean_update(empty, 1.0, 2) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("analytic gradients match finite differences") {
  const Dataset ds = synth_dataset(small_spec(), 21);
  Rng rng(77);
  const Model logistic = Model::logistic(2);
  const Model mlp = Model::mlp(2, 8);
  for (int trial = 0; trial < 5; ++trial) {
    const DataPoint& p = ds.points[static_cast<std::size_t>(
        rng.below(ds.points.size()))];
    check_grad(logistic, rng, p);
    check_grad(mlp, rng, p);
  }
}

TEST_CASE("noiseless full-batch step matches plain clipped GD") {
  SynthSpec spec = small_spec();
  spec.points_per_cluster = 10;
  const Dataset ds = synth_dataset(spec, 2);
  TrainerConfig config;
  config.expected_batch = static_cast<int>(ds.points.size());
  config.noise_multiplier = 0.0;
  config.learning_rate = 0.1;
  config.steps = 1;
  const Model model = Model::logistic(2);
  Rng init(3);
  const std::vector<double> theta = model.init_params(init);

  Rng step_rng(4);
  const auto [next, record] = dpsgd_step(theta, ds, config, model, step_rng);
  CHECK(record.batch_size == static_cast<int>(ds.points.size()));

  // Reference: full-batch clipped-gradient descent with the same scaling.
  std::vector<double> expect(theta.begin(), theta.end());
  std::vector<double> acc = zeros(theta.size());
  for (const DataPoint& p : ds.points)
    axpy(1.0, clip_grad(model.grad(theta, p), config.clip), acc);
  scale(acc, 1.0 / config.expected_batch);
  axpy(-config.learning_rate, acc, expect);
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(next[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("zero learning rate freezes parameters") {
  const Dataset ds = synth_dataset(small_spec(), 2);
  TrainerConfig config;
  config.learning_rate = 1e-300;  // validation requires > 0
  config.noise_multiplier = 0.0;
  const Model model = Model::logistic(2);
  Rng init(3);
  const std::vector<double> theta = model.init_params(init);
  Rng step_rng(4);
  const auto [next, record] = dpsgd_step(theta, ds, config, model, step_rng);
  for (std::size_t i = 0; i < theta.size(); ++i)
    CHECK(next[i] == doctest::Approx(theta[i]).epsilon(1e-12));
}

TEST_CASE("train_run determinism and clipping invariant") {
  const Dataset ds = synth_dataset(small_spec(), 6);
  TrainerConfig config;
  config.steps = 5;
  config.expected_batch = 16;
  config.seed = 99;
  config.tracked_ids = {ds.ids[0], ds.ids[1]};

  const RunTrace a = train_run(ds, config);
  const RunTrace b = train_run(ds, config);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].batch_size == b.steps[i].batch_size);
    CHECK(a.steps[i].delta == b.steps[i].delta);
  }
  REQUIRE(a.checkpoints.size() == b.checkpoints.size());
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i)
    CHECK(a.checkpoints[i].theta == b.checkpoints[i].theta);

  // Steps contiguous from 1; every recorded delta clipped to C/L.
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].step == static_cast<int>(i) + 1);
    for (const auto& [id, delta] : a.steps[i].delta) {
      CHECK(delta >= 0.0);
      CHECK(delta <= a.clip_bound + 1e-15);
    }
  }
  CHECK(a.sigma_effective ==
        doctest::Approx(config.noise_multiplier * config.clip /
                        config.expected_batch));
}

TEST_CASE("per_point_sensitivity") {
  const Dataset ds = synth_dataset(small_spec(), 6);
  const Model model = Model::logistic(2);
  Rng rng(1);
  const std::vector<double> theta = model.init_params(rng);

  const double raw = l2_norm(model.grad(theta, ds.points[0]));
  const double got =
      per_point_sensitivity(theta, ds.points[0], 0.01, 128.0, UpdateRule::kSum,
                            model);
  CHECK(got == doctest::Approx(std::min(raw, 0.01) / 128.0).epsilon(1e-12));

  // Delta/sigma is invariant to the normalization choice.
  const double c = 1.0, nm = 1.3;
  const double d_norm =
      per_point_sensitivity(theta, ds.points[0], c, 128.0, UpdateRule::kSum,
                            model);
  const double d_raw =
      per_point_sensitivity(theta, ds.points[0], c, 1.0, UpdateRule::kSum,
                            model);
  CHECK(d_norm / (nm * c / 128.0) ==
        doctest::Approx(d_raw / (nm * c)).epsilon(1e-12));

  CHECK_THROWS_AS(per_point_sensitivity(theta, ds.points[0], c, 128.0,
                                        UpdateRule::kMean, model),
                  std::invalid_argument);
}

TEST_CASE("multi_run shares the initialization") {
  const Dataset ds = synth_dataset(small_spec(), 6);
  TrainerConfig config;
  config.steps = 3;
  config.expected_batch = 16;
  config.tracked_ids = {ds.ids[0]};

  const std::vector<RunTrace> traces = multi_run(ds, config, 4, 500);
  REQUIRE(traces.size() == 4);
  for (const RunTrace& t : traces) {
    REQUIRE_FALSE(t.checkpoints.empty());
    CHECK(t.checkpoints.front().theta == traces[0].checkpoints.front().theta);
  }
  // Distinct seeds give distinct trajectories.
  CHECK(traces[0].checkpoints.back().theta !=
        traces[1].checkpoints.back().theta);
  // First-step sensitivities coincide (same init).
  CHECK(traces[0].steps[0].delta == traces[1].steps[0].delta);

  // R = 1 single trace; identical seed bases give identical traces.
  const std::vector<RunTrace> once = multi_run(ds, config, 1, 500);
  REQUIRE(once.size() == 1);
  CHECK(once[0].checkpoints.back().theta ==
        traces[0].checkpoints.back().theta);
}

TEST_CASE("config validation") {
  TrainerConfig config;
  config.steps = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.steps = 1;
  config.clip = 0.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.clip = 1.0;
  config.model = ModelKind::kMlp;
  config.hidden_width = 65;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}
