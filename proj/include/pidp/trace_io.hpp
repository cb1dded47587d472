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

#ifndef PIDP_TRACE_IO_HPP_
#define PIDP_TRACE_IO_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pidp/simulator.hpp"

namespace pidp {

inline constexpr int kTraceSchemaVersion = 1;

// One per-(run, step, point) sensitivity record. Line-delimited JSON on
// disk; doubles are emitted with round-trip-exact decimal encoding, so
// accounting re-runs bit-identically from a file. Fields this build does
// not know about survive a read/write cycle via `extra`.
struct TraceRecord {
  std::string run_id;
  int step = 0;
  std::string point_id;
  double delta = 0.0;
  double sigma_effective = 0.0;
  double q = 0.0;
  std::vector<std::pair<double, double>> orders;  // optional (order, eps)
  nlohmann::json extra = nlohmann::json::object();

  void validate() const;
};

void write_trace(std::span<const TraceRecord> records,
                 const std::filesystem::path& path);
std::vector<TraceRecord> read_trace(const std::filesystem::path& path);

// Full run traces (meta + checkpoints + records) share the same container
// format; read_trace on such a file yields just the records.
void write_run_traces(std::span<const RunTrace> traces,
                      const std::filesystem::path& path);
std::vector<RunTrace> read_run_traces(const std::filesystem::path& path);

struct ReportRow {
  std::string point_id;
  std::string step;  // step number or "total"
  double eps_ours = 0.0;
  double eps_baseline = 0.0;
  double ratio = 0.0;
  double ci_halfwidth = 0.0;

  static ReportRow make(std::string point_id, std::string step, double ours,
                        double baseline, double ci);
};

enum class ReportFormat { kCsv, kStructured };

ReportFormat report_format_from_name(const std::string& name);

// Stable column order point_id, step, eps_ours, eps_baseline, ratio, ci;
// byte-identical output for identical rows.
void write_report(std::span<const ReportRow> rows,
                  const std::filesystem::path& path, ReportFormat format);

std::string render_report(std::span<const ReportRow> rows,
                          ReportFormat format);

}  // namespace pidp

#endif  // PIDP_TRACE_IO_HPP_
