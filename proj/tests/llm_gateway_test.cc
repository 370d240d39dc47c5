// Copyright 2026 The Canary Audit Authors
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

#include "canary/llm_gateway.h"

#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "canary/error.h"
#include "httplib.h"
#include "test_util.h"

namespace canary {
namespace {

using nlohmann::json;

ChatRequest SampleRequest() {
  return ChatRequest{"You are helpful.", "Say hi.", 0.0, 16};
}

std::string ChatReply(const std::string& text, const std::string& finish = "stop") {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", text}}},
                                        {"finish_reason", finish}}})}}
      .dump();
}

GatewayOptions Scripted(std::vector<HttpResult> script, std::vector<std::string>* paths,
                        std::vector<std::chrono::milliseconds>* sleeps) {
  auto queue = std::make_shared<std::vector<HttpResult>>(std::move(script));
  auto next = std::make_shared<std::size_t>(0);
  GatewayOptions options;
  options.transport = [queue, next, paths](const std::string& path, const std::string&) {
    if (paths) paths->push_back(path);
    return (*queue)[std::min((*next)++, queue->size() - 1)];
  };
  options.sleeper = [sleeps](std::chrono::milliseconds d) {
    if (sleeps) sleeps->push_back(d);
  };
  return options;
}

TEST(ChatRequestTest, HashCoversEveryField) {
  const ChatRequest base = SampleRequest();
  ChatRequest other = base;
  EXPECT_EQ(base.Hash(), other.Hash());
  other.system_prompt += " ";
  EXPECT_NE(base.Hash(), other.Hash());
  other = base;
  other.user_prompt = "Say ho.";
  EXPECT_NE(base.Hash(), other.Hash());
  other = base;
  other.temperature = 0.7;
  EXPECT_NE(base.Hash(), other.Hash());
  other = base;
  other.max_output_tokens = 17;
  EXPECT_NE(base.Hash(), other.Hash());
}

TEST(ChatRequestTest, EmptyPromptRejected) {
  ChatRequest request = SampleRequest();
  request.user_prompt.clear();
  EXPECT_THROW(request.Validate(), Error);
}

TEST(GatewayRetryTest, TwoTransientFailuresThenSuccessTakesThreeAttempts) {
  std::vector<std::chrono::milliseconds> sleeps;
  GatewayOptions options =
      Scripted({HttpResult{503, "busy", "", ""}, HttpResult{0, "", "", "connection refused"},
                HttpResult{200, ChatReply("hello"), "", ""}},
               nullptr, &sleeps);
  options.retry.initial_backoff = std::chrono::milliseconds(100);
  Gateway gateway(std::move(options));
  const ChatResponse response = gateway.Chat(SampleRequest());
  EXPECT_EQ(response.text, "hello");
  EXPECT_EQ(response.finish_reason, FinishReason::kComplete);
  EXPECT_EQ(gateway.attempts(), 3u);
  ASSERT_EQ(sleeps.size(), 2u);
  EXPECT_EQ(sleeps[0].count(), 100);
  EXPECT_EQ(sleeps[1].count(), 200);
}

TEST(GatewayRetryTest, RetryAfterHeaderIsHonoured) {
  std::vector<std::chrono::milliseconds> sleeps;
  GatewayOptions options = Scripted(
      {HttpResult{429, "", "3", ""}, HttpResult{200, ChatReply("ok"), "", ""}}, nullptr,
      &sleeps);
  Gateway gateway(std::move(options));
  gateway.Chat(SampleRequest());
  ASSERT_EQ(sleeps.size(), 1u);
  EXPECT_EQ(sleeps[0].count(), 3000);
}

TEST(GatewayRetryTest, ExhaustedRetriesAreTransportErrors) {
  GatewayOptions options = Scripted({HttpResult{500, "", "", ""}}, nullptr, nullptr);
  options.retry.max_attempts = 4;
  Gateway gateway(std::move(options));
  try {
    gateway.Chat(SampleRequest());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTransport);
  }
  EXPECT_EQ(gateway.attempts(), 4u);
}

TEST(GatewayRetryTest, ClientErrorsAreNotRetried) {
  GatewayOptions options = Scripted({HttpResult{401, "no key", "", ""}}, nullptr, nullptr);
  Gateway gateway(std::move(options));
  EXPECT_THROW(gateway.Chat(SampleRequest()), Error);
  EXPECT_EQ(gateway.attempts(), 1u);
}

TEST(GatewayChatTest, LengthFinishIsFlaggedTruncated) {
  Gateway gateway(Scripted({HttpResult{200, ChatReply("partial", "length"), "", ""}},
                           nullptr, nullptr));
  EXPECT_EQ(gateway.Chat(SampleRequest()).finish_reason, FinishReason::kTruncated);
}

TEST(GatewayChatTest, EmptyCompletionIsAnError) {
  Gateway gateway(Scripted({HttpResult{200, ChatReply(""), "", ""}}, nullptr, nullptr));
  EXPECT_EQ(gateway.Chat(SampleRequest()).finish_reason, FinishReason::kError);
}

TEST(GatewayFixtureTest, RecordThenReplayIsVerbatim) {
  testing::TempDir dir;
  {
    GatewayOptions options =
        Scripted({HttpResult{200, ChatReply("first \"quoted\"\nline"), "", ""},
                  HttpResult{200, ChatReply("second"), "", ""}},
                 nullptr, nullptr);
    options.mode = GatewayMode::kRecord;
    options.fixture_dir = dir.path();
    Gateway recorder(std::move(options));
    recorder.Chat(SampleRequest());
    recorder.Chat(SampleRequest());
  }
  const std::string hash = SampleRequest().Hash();
  EXPECT_TRUE(std::filesystem::exists(dir / (hash + ".json")));
  EXPECT_TRUE(std::filesystem::exists(dir / (hash + "-1.json")));

  GatewayOptions options;
  options.mode = GatewayMode::kReplay;
  options.fixture_dir = dir.path();
  options.transport = [](const std::string&, const std::string&) -> HttpResult {
    ADD_FAILURE() << "replay must not touch the network";
    return {};
  };
  Gateway replay(std::move(options));
  EXPECT_EQ(replay.Chat(SampleRequest()).text, "first \"quoted\"\nline");
  EXPECT_EQ(replay.Chat(SampleRequest()).text, "second");
  // Past the recorded repeats the base file answers again.
  EXPECT_EQ(replay.Chat(SampleRequest()).text, "first \"quoted\"\nline");
  EXPECT_EQ(replay.attempts(), 0u);
}

TEST(GatewayFixtureTest, MissingFixtureIsExplicit) {
  testing::TempDir dir;
  GatewayOptions options;
  options.mode = GatewayMode::kReplay;
  options.fixture_dir = dir.path();
  Gateway gateway(std::move(options));
  try {
    gateway.Chat(SampleRequest());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingFixture);
    EXPECT_NE(std::string(e.what()).find(SampleRequest().Hash()), std::string::npos);
  }
}

TEST(GatewayFixtureTest, MissingFixtureDirectoryIsRejected) {
  GatewayOptions options;
  options.mode = GatewayMode::kReplay;
  options.fixture_dir = "/nonexistent/fixtures";
  EXPECT_THROW(Gateway gateway(std::move(options)), Error);
}

TEST(GatewayEmbedTest, NormalizesUpstreamVector) {
  const std::string reply = json{{"data", {{{"embedding", {3.0, 4.0, 0.0}}}}}}.dump();
  Gateway gateway(Scripted({HttpResult{200, reply, "", ""}}, nullptr, nullptr));
  const std::vector<double> v = gateway.Embed("text");
  ASSERT_EQ(v.size(), 3u);
  EXPECT_NEAR(v[0], 0.6, 1e-12);
  EXPECT_NEAR(v[1], 0.8, 1e-12);
  EXPECT_EQ(v[2], 0.0);
  EXPECT_NEAR(std::hypot(v[0], v[1], v[2]), 1.0, 1e-6);
}

TEST(GatewayEmbedTest, DimensionDriftIsRejected) {
  const std::string a = json{{"data", {{{"embedding", {1.0, 2.0, 3.0}}}}}}.dump();
  const std::string b = json{{"data", {{{"embedding", {1.0, 2.0}}}}}}.dump();
  Gateway gateway(
      Scripted({HttpResult{200, a, "", ""}, HttpResult{200, b, "", ""}}, nullptr, nullptr));
  gateway.Embed("one");
  EXPECT_THROW(gateway.Embed("two"), Error);
}

TEST(GatewayEmbedTest, ReplayIsDeterministic) {
  testing::TempDir dir;
  {
    const std::string reply = json{{"data", {{{"embedding", {0.1, -0.7, 2.0, 0.3}}}}}}.dump();
    GatewayOptions options = Scripted({HttpResult{200, reply, "", ""}}, nullptr, nullptr);
    options.mode = GatewayMode::kRecord;
    options.fixture_dir = dir.path();
    Gateway(std::move(options)).Embed("same text");
  }
  GatewayOptions options;
  options.mode = GatewayMode::kReplay;
  options.fixture_dir = dir.path();
  Gateway gateway(std::move(options));
  const auto first = gateway.Embed("same text");
  const auto second = gateway.Embed("same text");
  EXPECT_EQ(first, second);
}

TEST(NormalizeTest, RejectsZeroVector) {
  EXPECT_THROW(NormalizeL2({0.0, 0.0}), Error);
  EXPECT_THROW(NormalizeL2({}), Error);
}

TEST(SplitBaseUrlTest, SeparatesHostAndPrefix) {
  EXPECT_EQ(SplitBaseUrl("https://api.example.com/v1/"),
            (std::pair<std::string, std::string>{"https://api.example.com", "/v1"}));
  EXPECT_EQ(SplitBaseUrl("http://127.0.0.1:8080"),
            (std::pair<std::string, std::string>{"http://127.0.0.1:8080", ""}));
  EXPECT_THROW(SplitBaseUrl("localhost"), Error);
}

TEST(GatewayHttpTest, LocalServerWithTransientFailures) {
  httplib::Server server;
  std::atomic<int> calls{0};
  std::string seen_auth;
  json seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++calls;
    if (n <= 2) {
      res.status = 503;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    seen_body = json::parse(req.body);
    res.set_content(ChatReply("from server"), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  GatewayOptions options;
  options.endpoint.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  options.endpoint.api_key = "test-key";
  options.endpoint.timeout_seconds = 5;
  options.retry.initial_backoff = std::chrono::milliseconds(1);
  Gateway gateway(std::move(options));
  const ChatResponse response = gateway.Chat(SampleRequest());
  server.stop();
  thread.join();

  EXPECT_EQ(response.text, "from server");
  EXPECT_EQ(calls.load(), 3);
  EXPECT_EQ(gateway.attempts(), 3u);
  EXPECT_EQ(seen_auth, "Bearer test-key");
  EXPECT_EQ(seen_body["messages"][0]["role"], "system");
  EXPECT_EQ(seen_body["messages"][1]["content"], "Say hi.");
  EXPECT_EQ(seen_body["max_tokens"], 16);
}

TEST(GatewayHttpTest, UnreachableHostIsTransportError) {
  GatewayOptions options;
  options.endpoint.base_url = "http://127.0.0.1:1";
  options.endpoint.timeout_seconds = 1;
  options.retry.max_attempts = 2;
  options.sleeper = [](std::chrono::milliseconds) {};
  Gateway gateway(std::move(options));
  try {
    gateway.Chat(SampleRequest());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTransport);
  }
}

}  // namespace
}  // namespace canary
