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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "pidp/errors.hpp"
#include "pidp/rng.hpp"
#include "pidp/simulator.hpp"
#include "pidp/trace_io.hpp"

using namespace pidp;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pidp_test_" + name);
}

TraceRecord sample_record(int step, const std::string& point) {
  TraceRecord r;
  r.run_id = "run-1";
  r.step = step;
  r.point_id = point;
  r.delta = 0.0078125;
  r.sigma_effective = 0.0078125;
  r.q = 0.1;
  r.orders = {{8.0, 0.125}, {15.0, 0.25}};
  return r;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string all((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return all;
}

}  // namespace

TEST_CASE("trace round trip") {
  const auto path = temp_file("roundtrip.jsonl");
  std::vector<TraceRecord> records = {sample_record(1, "p0"),
                                      sample_record(1, "p1"),
                                      sample_record(2, "p0")};
  records[0].extra["note"] = "kept";
  write_trace(records, path);
  const std::vector<TraceRecord> back = read_trace(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].run_id == records[i].run_id);
    CHECK(back[i].step == records[i].step);
    CHECK(back[i].point_id == records[i].point_id);
    CHECK(back[i].delta == records[i].delta);
    CHECK(back[i].sigma_effective == records[i].sigma_effective);
    CHECK(back[i].q == records[i].q);
    CHECK(back[i].orders == records[i].orders);
  }
  // Unknown fields survive the round trip.
  CHECK(back[0].extra.at("note") == "kept");
  std::filesystem::remove(path);
}

TEST_CASE("float round trip is bit exact") {
  // Doubles with awkward decimal expansions, denormals included.
  Rng rng(123);
  std::vector<TraceRecord> records;
  std::vector<double> deltas = {0.1, 1.0 / 3.0, 5e-324, 1e-300, 2.2250738585072014e-308,
                                0.0078125, 6.02214076e23};
  for (int i = 0; i < 200; ++i)
    deltas.push_back(std::exp(40.0 * (rng.uniform() - 0.5)) * rng.uniform());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    TraceRecord r = sample_record(static_cast<int>(i), "p0");
    r.delta = deltas[i];
    records.push_back(r);
  }
  const auto path = temp_file("floats.jsonl");
  write_trace(records, path);
  const std::vector<TraceRecord> back = read_trace(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::uint64_t a, b;
    std::memcpy(&a, &records[i].delta, sizeof(a));
    std::memcpy(&b, &back[i].delta, sizeof(b));
    CHECK(a == b);
  }
  std::filesystem::remove(path);
}

TEST_CASE("empty and malformed traces") {
  const auto path = temp_file("empty.jsonl");
  write_trace({}, path);
  CHECK(read_trace(path).empty());

  // Corrupt line 7 and expect it to be named.
  std::vector<TraceRecord> records;
  for (int i = 0; i < 8; ++i)
    records.push_back(sample_record(i + 1, "p0"));
  write_trace(records, path);
  std::string contents = slurp(path);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    const std::size_t nl = contents.find('\n', pos);
    lines.push_back(contents.substr(pos, nl - pos));
    pos = nl + 1;
  }
  lines[6] = "{broken";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const std::string& l : lines) out << l << '\n';
  out.close();
  try {
    read_trace(path);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("line 7") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("schema version mismatch is explicit") {
  const auto path = temp_file("version.jsonl");
  std::ofstream out(path, std::ios::binary);
  out << R"({"schema":"pidp-trace","version":999})" << '\n';
  out.close();
  CHECK_THROWS_AS(read_trace(path), SchemaError);

  std::ofstream out2(path, std::ios::binary | std::ios::trunc);
  out2 << R"({"something":"else"})" << '\n';
  out2.close();
  CHECK_THROWS_AS(read_trace(path), SchemaError);
  std::filesystem::remove(path);
}

TEST_CASE("duplicate records rejected") {
  const std::vector<TraceRecord> dup = {sample_record(1, "p0"),
                                        sample_record(1, "p0")};
  CHECK_THROWS_AS(write_trace(dup, temp_file("dup.jsonl")), SchemaError);
}

TEST_CASE("run trace round trip") {
  SynthSpec spec;
  spec.clusters = 2;
  spec.points_per_cluster = 20;
  const Dataset ds = synth_dataset(spec, 8);
  TrainerConfig config;
  config.steps = 4;
  config.expected_batch = 8;
  config.tracked_ids = {ds.ids[0], ds.ids[3]};
  const std::vector<RunTrace> traces = multi_run(ds, config, 2, 42);

  const auto path = temp_file("runs.jsonl");
  write_run_traces(traces, path);
  const std::vector<RunTrace> back = read_run_traces(path);
  REQUIRE(back.size() == traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    CHECK(back[i].run_id == traces[i].run_id);
    CHECK(back[i].q == traces[i].q);
    CHECK(back[i].sigma_effective == traces[i].sigma_effective);
    CHECK(back[i].clip_bound == traces[i].clip_bound);
    REQUIRE(back[i].steps.size() == traces[i].steps.size());
    for (std::size_t s = 0; s < traces[i].steps.size(); ++s)
      CHECK(back[i].steps[s].delta == traces[i].steps[s].delta);
    REQUIRE(back[i].checkpoints.size() == traces[i].checkpoints.size());
    for (std::size_t c = 0; c < traces[i].checkpoints.size(); ++c)
      CHECK(back[i].checkpoints[c].theta == traces[i].checkpoints[c].theta);
  }
  // Plain read_trace sees exactly the per-point records.
  const std::vector<TraceRecord> records = read_trace(path);
  CHECK(records.size() == 2 * 4 * 2);  // runs x steps x tracked points
  std::filesystem::remove(path);
}

TEST_CASE("report rendering") {
  std::vector<ReportRow> rows;
  rows.push_back(ReportRow::make("p0", "1", 0.5, 1.0, 0.01));
  rows.push_back(ReportRow::make("p0", "total", 2.0, 2.0, 0.0));

  const std::string csv = render_report(rows, ReportFormat::kCsv);
  CHECK(csv ==
        "point_id,step,eps_ours,eps_baseline,ratio,ci\n"
        "p0,1,0.5,1,0.5,0.01\n"
        "p0,total,2,2,1,0\n");

  // Single CSV row has exactly 6 fields.
  const std::string line = csv.substr(csv.find('\n') + 1);
  const std::string first = line.substr(0, line.find('\n'));
  CHECK(std::count(first.begin(), first.end(), ',') == 5);

  // Deterministic bytes for identical input, in both formats.
  CHECK(render_report(rows, ReportFormat::kCsv) == csv);
  CHECK(render_report(rows, ReportFormat::kStructured) ==
        render_report(rows, ReportFormat::kStructured));

  // ratio = 1.0 exactly when ours == baseline.
  CHECK(rows[1].ratio == 1.0);

  const auto path = temp_file("report.csv");
  write_report(rows, path, ReportFormat::kCsv);
  CHECK(slurp(path) == csv);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(report_format_from_name("xml"), std::invalid_argument);
}
