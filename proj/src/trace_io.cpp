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

#include "pidp/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "pidp/errors.hpp"

namespace pidp {
namespace {

using nlohmann::json;

const char* const kKnownRecordFields[] = {"kind", "v",     "run_id", "step",
                                          "point_id", "delta", "sigma_effective",
                                          "q",    "orders"};

json header_line() {
  return json{{"schema", "pidp-trace"}, {"version", kTraceSchemaVersion}};
}

void write_lines(const std::vector<json>& lines,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SchemaError("cannot open " + path.string() + " for writing");
  for (const json& line : lines) out << line.dump() << '\n';
  if (!out) throw SchemaError("write to " + path.string() + " failed");
}

std::vector<std::pair<int, json>> read_lines(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path.string());
  std::vector<std::pair<int, json>> lines;
  std::string raw;
  int number = 0;
  bool saw_header = false;
  while (std::getline(in, raw)) {
    ++number;
    if (raw.empty()) continue;
    json parsed;
    try {
      parsed = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw SchemaError("malformed trace line " + std::to_string(number) +
                        " in " + path.string() + ": " + e.what());
    }
    if (!saw_header) {
      if (!parsed.is_object() || parsed.value("schema", "") != "pidp-trace")
        throw SchemaError("missing pidp-trace header in " + path.string());
      const int version = parsed.value("version", -1);
      if (version != kTraceSchemaVersion)
        throw SchemaError("trace schema version " + std::to_string(version) +
                          " does not match supported version " +
                          std::to_string(kTraceSchemaVersion));
      saw_header = true;
      continue;
    }
    lines.emplace_back(number, std::move(parsed));
  }
  return lines;
}

json record_to_json(const TraceRecord& r) {
  json j = r.extra;  // unknown fields ride along
  j["kind"] = "record";
  j["v"] = kTraceSchemaVersion;
  j["run_id"] = r.run_id;
  j["step"] = r.step;
  j["point_id"] = r.point_id;
  j["delta"] = r.delta;
  j["sigma_effective"] = r.sigma_effective;
  j["q"] = r.q;
  if (!r.orders.empty()) {
    json pairs = json::array();
    for (const auto& [order, eps] : r.orders)
      pairs.push_back(json::array({order, eps}));
    j["orders"] = std::move(pairs);
  }
  return j;
}

TraceRecord record_from_json(const json& j, int line) {
  auto require = [&](const char* field) -> const json& {
    auto it = j.find(field);
    if (it == j.end())
      throw SchemaError("trace line " + std::to_string(line) +
                        " misses field '" + field + "'");
    return *it;
  };
  TraceRecord r;
  try {
    r.run_id = require("run_id").get<std::string>();
    r.step = require("step").get<int>();
    r.point_id = require("point_id").get<std::string>();
    r.delta = require("delta").get<double>();
    r.sigma_effective = require("sigma_effective").get<double>();
    r.q = require("q").get<double>();
    if (j.contains("orders"))
      for (const json& pair : j["orders"])
        r.orders.emplace_back(pair.at(0).get<double>(),
                              pair.at(1).get<double>());
  } catch (const json::exception& e) {
    throw SchemaError("trace line " + std::to_string(line) + ": " + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* f : kKnownRecordFields) known = known || key == f;
    if (!known) r.extra[key] = value;
  }
  return r;
}

void check_unique(std::span<const TraceRecord> records) {
  std::set<std::tuple<std::string, int, std::string>> seen;
  for (const TraceRecord& r : records) {
    if (!seen.emplace(r.run_id, r.step, r.point_id).second)
      throw SchemaError("duplicate record for (" + r.run_id + ", step " +
                        std::to_string(r.step) + ", " + r.point_id + ")");
  }
}

std::string format_sig(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void TraceRecord::validate() const {
  if (run_id.empty() || point_id.empty())
    throw SchemaError("trace record needs run_id and point_id");
  if (step < 0) throw SchemaError("trace record step must be >= 0");
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw SchemaError("trace record delta must be nonnegative");
  if (!(sigma_effective > 0.0))
    throw SchemaError("trace record sigma_effective must be positive");
  if (!(q >= 0.0 && q <= 1.0))
    throw SchemaError("trace record q must lie in [0, 1]");
}

void write_trace(std::span<const TraceRecord> records,
                 const std::filesystem::path& path) {
  check_unique(records);
  std::vector<json> lines;
  lines.reserve(records.size() + 1);
  lines.push_back(header_line());
  for (const TraceRecord& r : records) {
    r.validate();
    lines.push_back(record_to_json(r));
  }
  write_lines(lines, path);
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path) {
  std::vector<TraceRecord> records;
  for (const auto& [line, j] : read_lines(path)) {
    if (!j.is_object())
      throw SchemaError("trace line " + std::to_string(line) +
                        " is not an object");
    if (j.value("kind", "record") != "record") continue;
    records.push_back(record_from_json(j, line));
  }
  check_unique(records);
  return records;
}

void write_run_traces(std::span<const RunTrace> traces,
                      const std::filesystem::path& path) {
  std::vector<json> lines;
  lines.push_back(header_line());
  for (const RunTrace& t : traces) {
    lines.push_back(json{{"kind", "meta"},
                         {"run_id", t.run_id},
                         {"q", t.q},
                         {"sigma_effective", t.sigma_effective},
                         {"clip_bound", t.clip_bound},
                         {"rule", update_rule_name(t.rule)},
                         {"steps", static_cast<int>(t.steps.size())}});
    for (const Checkpoint& c : t.checkpoints)
      lines.push_back(json{{"kind", "checkpoint"},
                           {"run_id", c.run_id},
                           {"step", c.step},
                           {"rng_cursor", c.rng_cursor},
                           {"theta", c.theta}});
    for (const StepRecord& s : t.steps) {
      for (const auto& [point_id, delta] : s.delta) {
        TraceRecord r;
        r.run_id = t.run_id;
        r.step = s.step;
        r.point_id = point_id;
        r.delta = delta;
        r.sigma_effective = t.sigma_effective;
        r.q = t.q;
        json j = record_to_json(r);
        j["batch_size"] = s.batch_size;
        lines.push_back(std::move(j));
      }
      if (s.delta.empty())
        lines.push_back(json{{"kind", "step"},
                             {"run_id", t.run_id},
                             {"step", s.step},
                             {"batch_size", s.batch_size}});
    }
  }
  write_lines(lines, path);
}

std::vector<RunTrace> read_run_traces(const std::filesystem::path& path) {
  std::vector<RunTrace> traces;
  auto trace_for = [&](const std::string& run_id) -> RunTrace& {
    for (RunTrace& t : traces)
      if (t.run_id == run_id) return t;
    traces.emplace_back();
    traces.back().run_id = run_id;
    return traces.back();
  };
  auto step_for = [](RunTrace& t, int step) -> StepRecord& {
    for (StepRecord& s : t.steps)
      if (s.step == step) return s;
    t.steps.push_back(StepRecord{step, 0, {}});
    return t.steps.back();
  };

  for (const auto& [line, j] : read_lines(path)) {
    const std::string kind = j.value("kind", "record");
    try {
      if (kind == "meta") {
        RunTrace& t = trace_for(j.at("run_id").get<std::string>());
        t.q = j.at("q").get<double>();
        t.sigma_effective = j.at("sigma_effective").get<double>();
        t.clip_bound = j.at("clip_bound").get<double>();
        t.rule = j.at("rule").get<std::string>() == "mean" ? UpdateRule::kMean
                                                           : UpdateRule::kSum;
      } else if (kind == "checkpoint") {
        RunTrace& t = trace_for(j.at("run_id").get<std::string>());
        Checkpoint c;
        c.run_id = t.run_id;
        c.step = j.at("step").get<int>();
        c.rng_cursor = j.value("rng_cursor", 0ULL);
        c.theta = j.at("theta").get<std::vector<double>>();
        t.checkpoints.push_back(std::move(c));
      } else if (kind == "step") {
        RunTrace& t = trace_for(j.at("run_id").get<std::string>());
        StepRecord& s = step_for(t, j.at("step").get<int>());
        s.batch_size = j.value("batch_size", 0);
      } else if (kind == "record") {
        const TraceRecord r = record_from_json(j, line);
        RunTrace& t = trace_for(r.run_id);
        StepRecord& s = step_for(t, r.step);
        s.delta[r.point_id] = r.delta;
        s.batch_size = j.value("batch_size", s.batch_size);
      }
      // Unknown kinds are skipped for forward compatibility.
    } catch (const json::exception& e) {
      throw SchemaError("trace line " + std::to_string(line) + ": " + e.what());
    }
  }

  for (RunTrace& t : traces) {
    std::sort(t.steps.begin(), t.steps.end(),
              [](const StepRecord& a, const StepRecord& b) {
                return a.step < b.step;
              });
    std::sort(t.checkpoints.begin(), t.checkpoints.end(),
              [](const Checkpoint& a, const Checkpoint& b) {
                return a.step < b.step;
              });
  }
  return traces;
}

ReportRow ReportRow::make(std::string point_id, std::string step, double ours,
                          double baseline, double ci) {
  ReportRow row;
  row.point_id = std::move(point_id);
  row.step = std::move(step);
  row.eps_ours = ours;
  row.eps_baseline = baseline;
  row.ratio = baseline > 0.0 ? ours / baseline
                             : std::numeric_limits<double>::quiet_NaN();
  row.ci_halfwidth = ci;
  return row;
}

ReportFormat report_format_from_name(const std::string& name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "structured") return ReportFormat::kStructured;
  throw std::invalid_argument("unknown report format: " + name);
}

std::string render_report(std::span<const ReportRow> rows,
                          ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    out << "point_id,step,eps_ours,eps_baseline,ratio,ci\n";
    for (const ReportRow& r : rows)
      out << r.point_id << ',' << r.step << ',' << format_sig(r.eps_ours)
          << ',' << format_sig(r.eps_baseline) << ',' << format_sig(r.ratio)
          << ',' << format_sig(r.ci_halfwidth) << '\n';
  } else {
    for (const ReportRow& r : rows) {
      nlohmann::ordered_json j;
      j["point_id"] = r.point_id;
      j["step"] = r.step;
      j["eps_ours"] = r.eps_ours;
      j["eps_baseline"] = r.eps_baseline;
      j["ratio"] = r.ratio;
      j["ci"] = r.ci_halfwidth;
      out << j.dump() << '\n';
    }
  }
  return out.str();
}

void write_report(std::span<const ReportRow> rows,
                  const std::filesystem::path& path, ReportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SchemaError("cannot open " + path.string() + " for writing");
  out << render_report(rows, format);
  if (!out) throw SchemaError("write to " + path.string() + " failed");
}

}  // namespace pidp
