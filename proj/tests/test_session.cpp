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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "pidp/errors.hpp"
#include "pidp/session.hpp"

using namespace pidp;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pidp_session_" + name);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

SessionConfig desk_config() {
  SessionConfig config;
  config.dataset.clusters = 2;
  config.dataset.points_per_cluster = 40;
  config.dataset.duplicate_target = true;
  config.dataset_seed = 5;
  config.trainer.steps = 6;
  config.trainer.expected_batch = 16;
  config.trainer.tracked_ids = {"target", "p0"};
  config.accounting.alpha = 8;
  config.accounting.runs = 3;
  return config;
}

}  // namespace

TEST_CASE("config file parsing") {
  const auto path = temp_file("config.json");
  std::ofstream out(path);
  out << R"({
    "dataset": {"clusters": 3, "points_per_cluster": 10, "dim": 4,
                 "duplicate_target": true, "seed": 9},
    "trainer": {"learning_rate": 0.25, "expected_batch": 32, "steps": 7,
                 "update_rule": "mean", "model": "mlp", "hidden_width": 4},
    "accounting": {"alpha": 4, "runs": 5, "p": "auto", "direction": "forward"}
  })";
  out.close();
  const SessionConfig config = load_session_config(path);
  CHECK(config.dataset.clusters == 3);
  CHECK(config.dataset.dim == 4);
  CHECK(config.dataset_seed == 9);
  CHECK(config.trainer.learning_rate == 0.25);
  CHECK(config.trainer.rule == UpdateRule::kMean);
  CHECK(config.trainer.model == ModelKind::kMlp);
  CHECK(config.accounting.alpha == 4);
  CHECK_FALSE(config.accounting.p.has_value());
  CHECK(config.accounting.direction == Direction::kXprimeToX);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_session_config(temp_file("missing.json")), SchemaError);
}

TEST_CASE("session datasets share points minus the target") {
  const SessionConfig config = desk_config();
  const Dataset xprime = session_dataset(config, DatasetVariant::kWithTarget);
  const Dataset x = session_dataset(config, DatasetVariant::kWithoutTarget);
  CHECK(xprime.points.size() == x.points.size() + 1);
  CHECK(xprime.index_of("target") >= 0);
  CHECK(x.index_of("target") < 0);
}

TEST_CASE("compose_from_traces ratios behave") {
  const SessionConfig config = desk_config();
  const Dataset ds = session_dataset(config, DatasetVariant::kWithTarget);
  const std::vector<RunTrace> traces =
      multi_run(ds, config.trainer, config.accounting.runs, 1234);

  const PointComposition pc = compose_from_traces(
      traces, "target", config.accounting, Direction::kXprimeToX);
  CHECK(pc.ours.total_epsilon >= 0.0);
  CHECK(pc.baseline.total_epsilon > 0.0);
  // Per-instance sensitivities never exceed the clip bound, so every
  // per-step contribution is at most the baseline's.
  for (std::size_t i = 0; i < pc.ours.per_step_contributions.size(); ++i)
    CHECK(pc.ours.per_step_contributions[i] <=
          pc.baseline.per_step_contributions[i] + 1e-12);

  // Contributions sum to the total.
  double sum = 0.0;
  for (double c : pc.ours.per_step_contributions) sum += c;
  CHECK(sum == doctest::Approx(pc.ours.total_epsilon).epsilon(1e-12));

  const std::vector<ReportRow> rows = composition_rows(pc);
  CHECK(rows.size() == static_cast<std::size_t>(config.trainer.steps) + 1);
  CHECK(rows.back().step == "total");

  CHECK_THROWS_AS(compose_from_traces(traces, "nonexistent",
                                      config.accounting,
                                      Direction::kXprimeToX),
                  SchemaError);
}

TEST_CASE("cmd_simulate then cmd_account and cmd_compose") {
  const SessionConfig config = desk_config();
  const auto tx = temp_file("x.jsonl");
  const auto txp = temp_file("xp.jsonl");
  cmd_simulate(config, DatasetVariant::kWithoutTarget, 3, 900, tx);
  cmd_simulate(config, DatasetVariant::kWithTarget, 3, 901, txp);

  const auto account_csv = temp_file("account.csv");
  cmd_account(txp, 8, {}, account_csv, ReportFormat::kCsv);
  const std::string account = slurp(account_csv);
  CHECK(account.find("point_id,step,eps_ours,eps_baseline,ratio,ci") == 0);
  CHECK(account.find("target") != std::string::npos);

  const auto compose_csv = temp_file("compose.csv");
  AccountingSpec spec = config.accounting;
  spec.direction = Direction::kMax;
  cmd_compose(tx, txp, spec, compose_csv, ReportFormat::kCsv);
  const std::string composed = slurp(compose_csv);
  CHECK(composed.find("total") != std::string::npos);

  // Determinism end to end: byte-identical outputs on a second pass.
  const auto tx2 = temp_file("x2.jsonl");
  cmd_simulate(config, DatasetVariant::kWithoutTarget, 3, 900, tx2);
  CHECK(slurp(tx) == slurp(tx2));

  for (const auto& p : {tx, txp, tx2, account_csv, compose_csv})
    std::filesystem::remove(p);
}

TEST_CASE("cmd_account needs a clip bound for record-only traces") {
  // Build a record-only file via write_trace.
  std::vector<TraceRecord> records;
  TraceRecord r;
  r.run_id = "ext-1";
  r.step = 1;
  r.point_id = "p0";
  r.delta = 0.002;
  r.sigma_effective = 0.0078125;
  r.q = 0.1;
  records.push_back(r);
  const auto path = temp_file("external.jsonl");
  write_trace(records, path);

  const auto out = temp_file("external.csv");
  CHECK_THROWS_AS(cmd_account(path, 8, {}, out, ReportFormat::kCsv),
                  SchemaError);
  cmd_account(path, 8, 0.0078125, out, ReportFormat::kCsv);
  const std::string report = slurp(out);
  CHECK(report.find("ext-1/p0") != std::string::npos);
  std::filesystem::remove(path);
  std::filesystem::remove(out);
}

TEST_CASE("mean sampler concentrates with batch size") {
  SessionConfig config = desk_config();
  config.dataset.points_per_cluster = 100;
  const Dataset ds = session_dataset(config, DatasetVariant::kWithTarget);
  const Model model = Model::for_config(ds.dim(), config.trainer);
  Rng init(4);
  const std::vector<double> theta = model.init_params(init);

  auto spread = [&](double q) {
    MinibatchMeanSampler sampler(ds, model, theta, q, config.trainer.clip);
    Rng rng(11);
    std::vector<UpdateVector> draws;
    for (int i = 0; i < 60; ++i) draws.push_back(sampler.draw(rng));
    UpdateVector mean(static_cast<std::size_t>(sampler.dim()), 0.0);
    for (const auto& u : draws)
      for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += u[d] / 60.0;
    double var = 0.0;
    for (const auto& u : draws)
      for (std::size_t d = 0; d < mean.size(); ++d)
        var += (u[d] - mean[d]) * (u[d] - mean[d]);
    return var / 60.0;
  };
  CHECK(spread(0.5) < spread(0.05));
}

TEST_CASE("cmd_general_bound reports per-checkpoint bounds") {
  SessionConfig config = desk_config();
  config.trainer.rule = UpdateRule::kMean;
  config.trainer.steps = 2;
  config.trainer.checkpoint_every = 1;
  config.accounting.alpha = 4;

  const auto traces = temp_file("mean.jsonl");
  cmd_simulate(config, DatasetVariant::kWithTarget, 1, 31, traces);

  const auto out = temp_file("general.csv");
  cmd_general_bound(config, traces, 5, 5, 77, out, ReportFormat::kCsv);
  const std::string report = slurp(out);
  CHECK(report.find("target") != std::string::npos);
  // One row per checkpoint (init + 2 steps) plus header.
  CHECK(std::count(report.begin(), report.end(), '\n') == 4);

  // A checkpoint that does not match the configured model is a data error.
  SessionConfig mismatched = config;
  mismatched.dataset.dim = 3;
  CHECK_THROWS_AS(cmd_general_bound(mismatched, traces, 5, 5, 77, out,
                                    ReportFormat::kCsv),
                  SchemaError);
  std::filesystem::remove(traces);
  std::filesystem::remove(out);
}

TEST_CASE("cmd_unlearn replays streams from disk") {
  const auto stream = temp_file("stream.jsonl");
  std::ofstream out(stream);
  out << R"({"d_high": 0.0, "d_step": 0.1})" << '\n'
      << R"({"d_high": 0.3, "d_step": 0.05})" << '\n'
      << R"({"d_high": 0.5, "d_step": 0.4})" << '\n';
  out.close();

  const auto log_path = temp_file("decisions.csv");
  cmd_unlearn(stream, 0.6, 2, NpiuCoefficient::kProof, log_path,
              ReportFormat::kCsv);
  const std::string log = slurp(log_path);
  CHECK(log.find("request-1/keep") != std::string::npos);
  CHECK(log.find("request-3/retrain") != std::string::npos);

  // Requests missing a divergence field are schema errors.
  std::ofstream bad(stream, std::ios::trunc);
  bad << R"({"d_high": 0.0})" << '\n';
  bad.close();
  CHECK_THROWS_AS(cmd_unlearn(stream, 0.6, 2, NpiuCoefficient::kProof,
                              log_path, ReportFormat::kCsv),
                  SchemaError);
  std::filesystem::remove(stream);
  std::filesystem::remove(log_path);
}
