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

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "common/error.hpp"
#include "protocol/protocol.hpp"

using namespace effbench;
using namespace effbench::protocol;

namespace {

std::string KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

std::vector<std::string> AwkwardStrings() {
  return {"", "plain", "with \"quotes\"", "tab\there", "new\nline", "back\\slash",
          "naïve café", "emoji \xF0\x9F\x98\x80", "{\"i\":3}", "\r\n", std::string(1, '\0')};
}

}  // namespace

TEST_SUITE("protocol") {

TEST_CASE("request and response round trip") {
  auto strs = AwkwardStrings();
  for (uint64_t idx : {0ULL, 1ULL, 41ULL, 1ULL << 40}) {
    std::string req = EncodeRequest(strs, idx);
    CHECK(req.back() == '\n');
    CHECK(std::count(req.begin(), req.end(), '\n') == 1);
    RequestLine r = DecodeRequest(req.substr(0, req.size() - 1));
    CHECK(r.batch == strs);
    CHECK(r.batch_index == idx);
    CHECK_FALSE(r.offline_path.has_value());

    std::string resp = EncodeResponse(strs, idx);
    CHECK(std::count(resp.begin(), resp.end(), '\n') == 1);
    ResponseLine o = DecodeResponse(resp.substr(0, resp.size() - 1), strs.size(), idx);
    CHECK(o.outputs == strs);
    CHECK(o.batch_index == idx);
  }
}

TEST_CASE("wire format is stable") {
  CHECK(EncodeRequest({"a", "b"}, 3) == "{\"batch\":[\"a\",\"b\"],\"i\":3}\n");
  CHECK(EncodeResponse({"x"}, 0) == "{\"outputs\":[\"x\"],\"i\":0}\n");
  CHECK(EncodeOfflineRequest("/tmp/f.txt", 0) == "{\"file\":\"/tmp/f.txt\",\"i\":0}\n");
  CHECK(EncodeReady({7, "m"}) == "{\"ready\":true,\"params\":7,\"name\":\"m\"}\n");
}

TEST_CASE("offline request round trip") {
  std::string line = EncodeOfflineRequest("/data/inst ances.txt", 0);
  RequestLine r = DecodeRequest(line);
  REQUIRE(r.offline_path.has_value());
  CHECK(*r.offline_path == "/data/inst ances.txt");
  CHECK(r.batch.empty());
}

TEST_CASE("invalid UTF-8 is replaced, not rejected") {
  std::string bad = "ok \xFF\xFE end";
  std::string line = EncodeRequest({bad}, 0);
  RequestLine r = DecodeRequest(line);
  CHECK(r.batch[0].find("ok ") == 0);
  CHECK(r.batch[0].find("\xEF\xBF\xBD") != std::string::npos);
}

TEST_CASE("decode errors") {
  CHECK(KindOf([] { DecodeResponse("not json", 1, 0); }) == "MalformedLine");
  CHECK(KindOf([] { DecodeResponse("[1,2]", 1, 0); }) == "MalformedLine");
  CHECK(KindOf([] { DecodeResponse("{\"outputs\":[\"a\"]}", 1, 0); }) == "MalformedLine");
  CHECK(KindOf([] { DecodeResponse("{\"outputs\":[1],\"i\":0}", 1, 0); }) == "MalformedLine");
  CHECK(KindOf([] { DecodeResponse("{\"outputs\":[\"a\"],\"i\":-1}", 1, 0); }) == "MalformedLine");
  CHECK(KindOf([] { DecodeResponse("{\"outputs\":[\"a\"],\"i\":1}", 1, 0); }) == "IndexMismatch");
  CHECK(KindOf([] { DecodeResponse("{\"outputs\":[\"a\"],\"i\":0}", 2, 0); }) == "LengthMismatch");
  CHECK(KindOf([] { DecodeRequest("{\"batch\":[],\"i\":0}"); }) == "MalformedLine");
  CHECK(KindOf([] { DecodeRequest("{\"batch\":[\"a\"],\"file\":\"f\",\"i\":0}"); }) == "MalformedLine");
  CHECK(KindOf([] { DecodeRequest("{\"i\":0}"); }) == "MalformedLine");

  try {
    DecodeResponse("{\"outputs\":[\"a\"],\"i\":0}", 3, 0);
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.error_class() == ErrorClass::kProtocol);
    CHECK(std::string(e.what()).find("{\"outputs\":[\"a\"],\"i\":0}") != std::string::npos);
  }
}

TEST_CASE("ready line") {
  auto r = ParseReady("{\"ready\":true,\"params\":125000000,\"name\":\"t5\"}");
  REQUIRE(r.has_value());
  CHECK(r->params == 125000000);
  CHECK(r->model_name == "t5");
  CHECK_FALSE(ParseReady("loading weights...").has_value());
  CHECK_FALSE(ParseReady("{\"ready\":false,\"params\":1}").has_value());
  CHECK_FALSE(ParseReady("{\"outputs\":[]}").has_value());
  CHECK(KindOf([] { ParseReady("{\"ready\":true}"); }) == "ProtocolError");
  CHECK(KindOf([] { ParseReady("{\"ready\":true,\"params\":-5}"); }) == "ProtocolError");
  CHECK(KindOf([] { ParseReady("{\"ready\":true,\"params\":1,\"name\":3}"); }) == "ProtocolError");
  CHECK(ParseReady(EncodeReady({42, "x"})) == ReadySignal{42, "x"});
}

TEST_CASE("line framing is independent of chunking") {
  // Property: any split of the byte stream yields the same lines.
  std::string stream;
  std::vector<std::string> expected;
  for (int i = 0; i < 50; ++i) {
    std::string line = EncodeResponse({"chunk " + std::to_string(i), "naïve\n"}, i);
    stream += line;
    expected.push_back(line.substr(0, line.size() - 1));
  }
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    LineDecoder dec;
    std::vector<std::string> got;
    size_t pos = 0;
    while (pos < stream.size()) {
      size_t n = 1 + rng() % 40;
      auto lines = dec.Feed(std::string_view(stream).substr(pos, n));
      got.insert(got.end(), lines.begin(), lines.end());
      pos += n;
    }
    CHECK(got == expected);
    CHECK_FALSE(dec.HasPartial());
  }
}

TEST_CASE("carriage returns and partial lines") {
  LineDecoder dec;
  auto lines = dec.Feed("a\r\nb\nparti");
  CHECK(lines == std::vector<std::string>{"a", "b"});
  CHECK(dec.HasPartial());
  CHECK(dec.Partial() == "parti");
  lines = dec.Feed("al\n");
  CHECK(lines == std::vector<std::string>{"partial"});
}

}  // TEST_SUITE
