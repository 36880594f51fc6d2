/* Copyright 2026 The effbench Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>

#include "../test_util.hpp"
#include "common/error.hpp"
#include "runner/runner.hpp"
#include "scenario/scenario.hpp"

using namespace effbench;
using namespace effbench::runner;
using json = nlohmann::json;

namespace {

std::string KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

ModelManifest Selftest(const std::string& mode, const std::vector<std::string>& extra = {}) {
  return ModelManifest::FromJson(testutil::SelftestManifest("m", mode, extra));
}

ModelManifest Shell(const std::string& script, double grace = 5.0) {
  return ModelManifest::FromJson(
      {{"name", "sh"}, {"start_command", {"/bin/sh", "-c", script}}, {"exit_grace_s", grace},
       {"startup_timeout_s", 5}, {"response_timeout_s", 5}});
}

BatchPlan StreamPlan(size_t n) {
  Dataset d = Dataset::Parse(testutil::ToyJsonl(n, 6, 2));
  return PlanSingleStream(d, ScenarioConfig::FromJson(
                                 {{"kind", "single_stream"}, {"instance_count", n}}, 0));
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("manifest parsing") {
  auto m = ModelManifest::FromJson({{"name", "x"}, {"start_command", {"a", "b"}},
                                    {"workdir", "sub"}, {"params_override", 5}},
                                   "/base");
  CHECK(m.workdir == "/base/sub");
  CHECK(m.params_override == 5u);
  CHECK(m.startup_timeout_s == 300.0);
  CHECK(m.response_timeout_s == 600.0);
  CHECK(m.exit_grace_s == 10.0);
  CHECK(KindOf([] { ModelManifest::FromJson({{"start_command", json::array()}}); }) ==
        "ConfigError");
  CHECK(KindOf([] { ModelManifest::FromJson({{"start_command", {"a"}}, {"startup_timeout_s", 0}}); }) ==
        "ConfigError");
  auto rt = ModelManifest::FromJson(m.ToJson());
  CHECK(rt.ToJson() == m.ToJson());
}

TEST_CASE("echo round trips and params come from the ready line") {
  auto conn = ModelConnection::Open(Selftest("echo", {"--params", "1234"}));
  CHECK(conn.params() == 1234);
  CHECK(conn.ready().model_name == "m");
  auto rec = conn.Exchange({"a", "b"}, 0);
  CHECK(rec.outputs == std::vector<std::string>{"a", "b"});
  CHECK(rec.size == 2);
  CHECK(rec.response_ts >= rec.dispatch_ts);
  CHECK(conn.Finish() == 0);
}

TEST_CASE("manifest params override wins") {
  auto m = Selftest("echo", {"--params", "1234"});
  m.params_override = 99;
  auto conn = ModelConnection::Open(m);
  CHECK(conn.params() == 99);
  conn.Finish();
}

TEST_CASE("startup chatter before ready is tolerated") {
  auto conn = ModelConnection::Open(Selftest("upper", {"--chatter"}));
  CHECK(conn.Exchange({"abc"}, 0).outputs[0] == "ABC");
  conn.Finish();
}

TEST_CASE("online run keeps order and indices; warm-up is not recorded") {
  auto conn = ModelConnection::Open(Selftest("echo"));
  BatchPlan plan = StreamPlan(12);
  int starts = 0, ends = 0;
  RunOptions opts;
  opts.warmup_batches = 3;
  opts.hooks.on_measure_start = [&](const RunRecord&) { ++starts; };
  opts.hooks.on_measure_end = [&](const RunRecord&) { ++ends; };
  auto out = RunOnline(conn, plan, opts);
  REQUIRE(out.ok());
  CHECK(starts == 1);
  CHECK(ends == 1);
  CHECK(out.record.batches.size() == 12);
  CHECK(out.record.measure_start > out.record.ready_at);
  auto flat = plan.Flatten();
  for (size_t i = 0; i < 12; ++i) CHECK(out.record.batches[i].outputs[0] == flat[i]->input);
  CHECK(conn.next_index() == 15);
  CHECK(out.record.run_end == out.record.batches.back().response_ts);
  conn.Finish();
}

TEST_CASE("protocol faults surface as errors with partial records") {
  struct Case {
    const char* fault;
    const char* kind;
    ErrorClass cls;
  };
  for (Case c : {Case{"short-output", "LengthMismatch", ErrorClass::kProtocol},
                 Case{"bad-index", "IndexMismatch", ErrorClass::kProtocol},
                 Case{"malformed", "MalformedLine", ErrorClass::kProtocol},
                 Case{"crash", "ModelCrashed", ErrorClass::kModelCrash}}) {
    CAPTURE(c.fault);
    auto conn = ModelConnection::Open(Selftest("echo", {"--fault", c.fault, "--fault-at", "2"}));
    auto out = RunOnline(conn, StreamPlan(5));
    REQUIRE_FALSE(out.ok());
    CHECK(out.error->kind() == c.kind);
    CHECK(out.error->error_class() == c.cls);
    CHECK(out.record.batches.size() == 2);
    conn.Finish();
  }
}

TEST_CASE("response timeout") {
  auto m = Selftest("echo", {"--fault", "hang"});
  m.response_timeout_s = 0.3;
  m.exit_grace_s = 0.2;
  auto conn = ModelConnection::Open(m);
  auto t0 = std::chrono::steady_clock::now();
  CHECK(KindOf([&] { conn.Exchange({"x"}, 0); }) == "ResponseTimeout");
  CHECK(testutil::Since(t0) < 2.0);
  CHECK(conn.Finish() != 0);
}

TEST_CASE("ready timeout, spawn failure and early exit") {
  auto m = Selftest("echo", {"--fault", "no-ready"});
  m.startup_timeout_s = 0.3;
  m.exit_grace_s = 0.2;
  try {
    ModelConnection::Open(m);
    FAIL("expected ReadyTimeout");
  } catch (const Error& e) {
    CHECK(e.kind() == "ReadyTimeout");
    CHECK(e.error_class() == ErrorClass::kProtocol);
  }
  auto bad = ModelManifest::FromJson({{"start_command", {"/nonexistent/model-binary"}}});
  CHECK(KindOf([&] { ModelConnection::Open(bad); }) == "SpawnFailure");
  CHECK(KindOf([] { ModelConnection::Open(Shell("exit 3")); }) == "ModelCrashed");
  CHECK(KindOf([] { ModelConnection::Open(Shell("echo '{\"ready\":true}'")); }) ==
        "ProtocolError");
}

TEST_CASE("model that ignores end of input is killed after the grace period") {
  auto conn = ModelConnection::Open(Shell(
      "trap '' TERM; echo '{\"ready\":true,\"params\":1,\"name\":\"x\"}'; exec sleep 30", 0.3));
  auto t0 = std::chrono::steady_clock::now();
  int status = conn.Finish();
  CHECK(status == 128 + 9);
  CHECK(testutil::Since(t0) < 3.0);
}

TEST_CASE("workdir and env reach the model") {
  testutil::TempDir tmp;
  auto m = ModelManifest::FromJson(
      {{"start_command",
        {"/bin/sh", "-c",
         "pwd > where.txt; echo \"$EB_PROBE\" >> where.txt; "
         "echo '{\"ready\":true,\"params\":1}'; cat >/dev/null"}},
       {"env", {{"EB_PROBE", "probe-value"}}}},
      tmp.path().string());
  auto conn = ModelConnection::Open(m);
  conn.Finish();
  std::string where = testutil::ReadFile(tmp / "where.txt");
  CHECK(where.find(std::filesystem::canonical(tmp.path()).string()) != std::string::npos);
  CHECK(where.find("probe-value") != std::string::npos);
}

TEST_CASE("setup command") {
  testutil::TempDir tmp;
  auto ok = ModelManifest::FromJson(
      {{"start_command", {"true"}}, {"setup_command", {"/bin/sh", "-c", "touch fetched"}}},
      tmp.path().string());
  RunSetupCommand(ok);
  CHECK(std::filesystem::exists(tmp.path() / "fetched"));
  auto bad = ModelManifest::FromJson(
      {{"start_command", {"true"}}, {"setup_command", {"/bin/sh", "-c", "exit 4"}}});
  CHECK(KindOf([&] { RunSetupCommand(bad); }) == "SetupFailed");
}

TEST_CASE("offline run answers every line of the instance file") {
  testutil::TempDir tmp;
  Dataset train = Dataset::Parse(testutil::ToyJsonl(400, 10, 8, "tr"));
  auto job = PlanOffline(train, train.MeanInputLength(),
                         ScenarioConfig::FromJson({{"kind", "offline"}, {"instance_count", 100}}, 0));
  job.WriteInstanceFile(tmp / "inst.txt");
  auto conn = ModelConnection::Open(Selftest("translator-toy"));
  auto out = RunOffline(conn, job, tmp / "inst.txt");
  REQUIRE(out.ok());
  REQUIRE(out.record.batches.size() == 1);
  CHECK(out.record.batches[0].outputs.size() == 100);
  CHECK(out.record.TotalInstances() == 100);
  conn.Finish();
}

}  // TEST_SUITE
