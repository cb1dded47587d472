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

// Per-instance DP-SGD accounting sessions: simulate desk-scale runs,
// account per-step bounds, compose whole-run guarantees, estimate
// general-update bounds, and replay unlearning ledgers.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pidp/errors.hpp"
#include "pidp/session.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

pidp::SessionConfig load_config_or_default(const std::string& path) {
  return path.empty() ? pidp::SessionConfig{} : pidp::load_session_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"per-instance DP-SGD accountant"};
  app.require_subcommand(1);

  std::string config_path, out_path, format_name = "csv";
  std::string traces_path, traces_x_path, traces_xprime_path, stream_path;
  std::string direction_name_flag, p_flag = "auto", variant_name = "xprime";
  std::string coefficient_name = "proof";
  std::uint64_t seed = 0;
  int runs = 0, alpha = 0, m_outer = 20, m_inner = 20;
  double beta = 0.0;
  std::optional<double> clip_override;

  CLI::App* simulate = app.add_subcommand("simulate", "run DP-SGD and write traces");
  simulate->add_option("--config", config_path, "session config (json)");
  simulate->add_option("--runs", runs, "override run count");
  simulate->add_option("--seed", seed, "base seed")->required();
  simulate->add_option("--out", out_path, "trace output path")->required();
  simulate->add_option("--variant", variant_name,
                       "dataset variant: xprime (with target) or x");

  CLI::App* account = app.add_subcommand("account", "per-step bounds and baseline ratios");
  account->add_option("--traces", traces_path, "trace file")->required();
  account->add_option("--alpha", alpha, "Renyi order override");
  account->add_option("--config", config_path, "session config (json)");
  account->add_option("--clip", clip_override, "clip bound for record-only traces");
  account->add_option("--out", out_path, "report path")->required();
  account->add_option("--format", format_name, "csv or structured");

  CLI::App* compose = app.add_subcommand("compose", "whole-run composed bounds");
  compose->add_option("--traces-x", traces_x_path, "runs on X");
  compose->add_option("--traces-xprime", traces_xprime_path, "runs on X'");
  compose->add_option("--config", config_path, "session config (json)");
  compose->add_option("--alpha", alpha, "Renyi order override");
  compose->add_option("--p", p_flag, "Hoelder constant or 'auto'");
  compose->add_option("--direction", direction_name_flag, "forward, reverse or max");
  compose->add_option("--out", out_path, "report path")->required();
  compose->add_option("--format", format_name, "csv or structured");

  CLI::App* general = app.add_subcommand("general-bound", "general-update (mean rule) bounds");
  general->add_option("--traces", traces_path, "trace file with checkpoints")->required();
  general->add_option("--config", config_path, "session config (json)");
  general->add_option("--alpha", alpha, "Renyi order override");
  general->add_option("--m-outer", m_outer, "outer sample count");
  general->add_option("--m-inner", m_inner, "inner sample count");
  general->add_option("--direction", direction_name_flag, "forward, reverse or max");
  general->add_option("--seed", seed, "estimator seed")->required();
  general->add_option("--out", out_path, "report path")->required();
  general->add_option("--format", format_name, "csv or structured");

  CLI::App* unlearn = app.add_subcommand("unlearn", "replay an unlearning request stream");
  unlearn->add_option("--stream", stream_path, "request stream (jsonl)")->required();
  unlearn->add_option("--beta", beta, "divergence budget")->required();
  unlearn->add_option("--alpha", alpha, "Renyi order")->required();
  unlearn->add_option("--coefficient", coefficient_name, "proof or text");
  unlearn->add_option("--out", out_path, "decision log path")->required();
  unlearn->add_option("--format", format_name, "csv or structured");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help text, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const pidp::ReportFormat format = pidp::report_format_from_name(format_name);

    if (simulate->parsed()) {
      pidp::SessionConfig config = load_config_or_default(config_path);
      if (runs > 0) config.accounting.runs = runs;
      const pidp::DatasetVariant variant =
          variant_name == "x" ? pidp::DatasetVariant::kWithoutTarget
                              : pidp::DatasetVariant::kWithTarget;
      pidp::cmd_simulate(config, variant, config.accounting.runs, seed,
                         out_path);
    } else if (account->parsed()) {
      pidp::SessionConfig config = load_config_or_default(config_path);
      if (alpha > 0) config.accounting.alpha = alpha;
      pidp::cmd_account(traces_path, config.accounting.alpha, clip_override,
                        out_path, format);
    } else if (compose->parsed()) {
      pidp::SessionConfig config = load_config_or_default(config_path);
      if (alpha > 0) config.accounting.alpha = alpha;
      if (!direction_name_flag.empty())
        config.accounting.direction =
            pidp::direction_from_name(direction_name_flag);
      if (p_flag == "auto")
        config.accounting.p.reset();
      else
        config.accounting.p = std::stod(p_flag);
      pidp::cmd_compose(traces_x_path, traces_xprime_path, config.accounting,
                        out_path, format);
    } else if (general->parsed()) {
      pidp::SessionConfig config = load_config_or_default(config_path);
      if (alpha > 0) config.accounting.alpha = alpha;
      if (!direction_name_flag.empty())
        config.accounting.direction =
            pidp::direction_from_name(direction_name_flag);
      pidp::cmd_general_bound(config, traces_path, m_outer, m_inner, seed,
                              out_path, format);
    } else if (unlearn->parsed()) {
      const pidp::NpiuCoefficient coefficient =
          coefficient_name == "text" ? pidp::NpiuCoefficient::kText
                                     : pidp::NpiuCoefficient::kProof;
      pidp::cmd_unlearn(stream_path, beta, alpha, coefficient, out_path,
                        format);
    }
  } catch (const pidp::SchemaError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const pidp::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}
