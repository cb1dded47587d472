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

#ifndef PIDP_SESSION_HPP_
#define PIDP_SESSION_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pidp/accountant.hpp"
#include "pidp/composition.hpp"
#include "pidp/general_update.hpp"
#include "pidp/simulator.hpp"
#include "pidp/trace_io.hpp"
#include "pidp/unlearning.hpp"

namespace pidp {

struct AccountingSpec {
  int alpha = 8;
  double delta = 1e-5;
  int runs = 10;
  std::optional<double> p;  // empty: pick by choose_p
  Direction direction = Direction::kMax;
  GpVariant gp_variant = GpVariant::kProof;
};

// Everything one CLI session needs: the dataset recipe, the trainer, and
// the accounting parameters. Defaults mirror the usual DP-SGD setup
// (alpha 8, delta 1e-5, clip 1, expected batch 128, 10 runs).
struct SessionConfig {
  SynthSpec dataset;
  std::uint64_t dataset_seed = 7;
  TrainerConfig trainer;
  AccountingSpec accounting;
};

SessionConfig load_session_config(const std::filesystem::path& path);

Direction direction_from_name(const std::string& name);

enum class DatasetVariant { kWithTarget, kWithoutTarget };

// The session's dataset; kWithoutTarget drops the tracked target point
// (the neighbouring dataset X of X' = X u {x*}).
Dataset session_dataset(const SessionConfig& config, DatasetVariant variant);

// Composition of one tracked point's per-step series bounds across runs,
// next to the identically-weighted data-independent baseline. Ratios of
// per-step contributions against the baseline are what the trend reports
// plot.
struct PointComposition {
  std::string point_id;
  Direction direction = Direction::kMax;
  CompositionPlan plan;
  CompositionResult ours;
  CompositionResult baseline;
};

PointComposition compose_from_traces(std::span<const RunTrace> traces,
                                     const std::string& point_id,
                                     const AccountingSpec& spec,
                                     Direction direction);

std::vector<ReportRow> composition_rows(const PointComposition& pc);

// Mean-rule minibatch update sampler over a fixed dataset and checkpoint.
class MinibatchMeanSampler : public UpdateSampler {
 public:
  MinibatchMeanSampler(const Dataset& dataset, const Model& model,
                       std::vector<double> theta, double q, double clip);

  UpdateVector draw(Rng& rng) override;
  int dim() const override;

 private:
  const Dataset& dataset_;
  double q_;
  std::vector<double> clipped_grads_;  // per point, flattened
  int param_dim_;
};

// Command implementations backing the CLI; tests drive them in-process.
// All of them throw (std::invalid_argument / SchemaError / NumericError)
// rather than exiting.
void cmd_simulate(const SessionConfig& config, DatasetVariant variant,
                  int runs, std::uint64_t seed,
                  const std::filesystem::path& out);

void cmd_account(const std::filesystem::path& traces, int alpha,
                 std::optional<double> clip_override,
                 const std::filesystem::path& out, ReportFormat format);

void cmd_compose(const std::filesystem::path& traces_x,
                 const std::filesystem::path& traces_xprime,
                 const AccountingSpec& spec, const std::filesystem::path& out,
                 ReportFormat format);

void cmd_general_bound(const SessionConfig& config,
                       const std::filesystem::path& traces, int m_outer,
                       int m_inner, std::uint64_t seed,
                       const std::filesystem::path& out, ReportFormat format);

void cmd_unlearn(const std::filesystem::path& stream, double beta, int alpha,
                 NpiuCoefficient coefficient,
                 const std::filesystem::path& out, ReportFormat format);

}  // namespace pidp

#endif  // PIDP_SESSION_HPP_
