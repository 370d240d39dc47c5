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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "canary/error.h"
#include "canary/hash.h"
#include "httplib.h"

namespace canary {
namespace {

using nlohmann::json;

constexpr char kSep = '\x1f';

bool IsTransientStatus(int status) {
  return status == 0 || status == 408 || status == 429 ||
         (status >= 500 && status <= 599);
}

std::string ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::chrono::milliseconds RetryAfter(const std::string& header) {
  if (header.empty()) return std::chrono::milliseconds(0);
  char* end = nullptr;
  const double seconds = std::strtod(header.c_str(), &end);
  if (end == header.c_str() || !std::isfinite(seconds) || seconds < 0) {
    return std::chrono::milliseconds(0);
  }
  return std::chrono::milliseconds(static_cast<long long>(seconds * 1000.0));
}

const json& Field(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) {
    Fail(ErrorKind::kTransport, what + ": response has no '" + key + "' field");
  }
  return j.at(key);
}

}  // namespace

void ChatRequest::Validate() const {
  Require(!system_prompt.empty() && !user_prompt.empty(),
          ErrorKind::kInvalidArgument, "chat prompts must be nonempty");
  Require(temperature >= 0.0 && std::isfinite(temperature),
          ErrorKind::kInvalidArgument, "chat temperature must be >= 0");
  Require(max_output_tokens >= 1, ErrorKind::kInvalidArgument,
          "chat max_output_tokens must be >= 1");
}

std::string ChatRequest::Hash() const {
  char temp[64];
  std::snprintf(temp, sizeof(temp), "%.6f", temperature);
  std::string key = system_prompt;
  key += kSep;
  key += user_prompt;
  key += kSep;
  key += temp;
  key += kSep;
  key += std::to_string(max_output_tokens);
  return Sha256Hex(key);
}

const char* FinishReasonName(FinishReason reason) {
  switch (reason) {
    case FinishReason::kComplete: return "complete";
    case FinishReason::kTruncated: return "truncated";
    case FinishReason::kError: return "error";
  }
  return "error";
}

FinishReason ParseFinishReason(std::string_view name) {
  if (name == "complete") return FinishReason::kComplete;
  if (name == "truncated") return FinishReason::kTruncated;
  if (name == "error") return FinishReason::kError;
  Fail(ErrorKind::kValidation, "unknown finish_reason '" + std::string(name) + "'");
}

std::vector<double> NormalizeL2(std::vector<double> v) {
  Require(!v.empty(), ErrorKind::kValidation, "embedding is empty");
  double norm_sq = 0.0;
  for (double x : v) {
    Require(std::isfinite(x), ErrorKind::kValidation,
            "embedding has a non-finite component");
    norm_sq += x * x;
  }
  Require(norm_sq > 0.0, ErrorKind::kValidation, "embedding is the zero vector");
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v) x *= inv;
  return v;
}

Endpoint ResolveEndpointFromEnv(Endpoint endpoint) {
  if (endpoint.base_url.empty()) {
    if (const char* url = std::getenv("CANARY_API_BASE")) endpoint.base_url = url;
  }
  if (endpoint.api_key.empty()) {
    if (const char* key = std::getenv("CANARY_API_KEY")) endpoint.api_key = key;
  }
  return endpoint;
}

GatewayMode ParseGatewayMode(std::string_view name) {
  if (name == "live") return GatewayMode::kLive;
  if (name == "replay") return GatewayMode::kReplay;
  if (name == "record") return GatewayMode::kRecord;
  Fail(ErrorKind::kValidation, "unknown gateway mode '" + std::string(name) +
                                   "' (expected live, replay or record)");
}

std::optional<json> FixtureStore::Next(const std::string& hash) {
  int k;
  {
    std::lock_guard lock(mu_);
    k = replay_seen_[hash]++;
  }
  std::filesystem::path path = dir_ / (hash + ".json");
  if (k > 0) {
    const auto repeat = dir_ / (hash + "-" + std::to_string(k) + ".json");
    if (std::filesystem::exists(repeat)) path = repeat;
  }
  if (!std::filesystem::exists(path)) return std::nullopt;
  json doc;
  try {
    doc = json::parse(ReadAll(path));
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, "corrupt fixture " + path.string() + ": " + e.what());
  }
  Require(doc.is_object() && doc.contains("response"), ErrorKind::kValidation,
          "fixture " + path.string() + " has no response");
  return doc.at("response");
}

void FixtureStore::Record(const std::string& hash, const std::string& kind,
                          const json& request, const json& response) {
  std::lock_guard lock(mu_);
  const int k = record_seen_[hash]++;
  std::filesystem::create_directories(dir_);
  const auto path =
      dir_ / (k == 0 ? hash + ".json" : hash + "-" + std::to_string(k) + ".json");
  const json doc = {{"kind", kind}, {"request", request}, {"response", response}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorKind::kIo, "cannot write fixture " + path.string());
  out << doc.dump(2) << '\n';
}

json ChatRequestToJson(const ChatRequest& request) {
  return {{"system_prompt", request.system_prompt},
          {"user_prompt", request.user_prompt},
          {"temperature", request.temperature},
          {"max_output_tokens", request.max_output_tokens}};
}

json ChatResponseToJson(const ChatResponse& response) {
  return {{"text", response.text},
          {"finish_reason", FinishReasonName(response.finish_reason)}};
}

ChatResponse ChatResponseFromJson(const json& j) {
  ChatResponse response;
  try {
    response.text = j.at("text").get<std::string>();
    response.finish_reason =
        ParseFinishReason(j.at("finish_reason").get<std::string>());
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, std::string("malformed chat fixture: ") + e.what());
  }
  return response;
}

std::pair<std::string, std::string> SplitBaseUrl(const std::string& url) {
  const auto scheme_end = url.find("://");
  Require(scheme_end != std::string::npos, ErrorKind::kValidation,
          "endpoint URL '" + url + "' has no scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

HttpTransport MakeHttpTransport(const Endpoint& endpoint) {
  return [endpoint](const std::string& path, const std::string& body) {
    std::string target = path;
    if (path.rfind("http://", 0) != 0 && path.rfind("https://", 0) != 0) {
      Require(!endpoint.base_url.empty(), ErrorKind::kValidation,
              "no endpoint URL configured (set CANARY_API_BASE)");
      target = endpoint.base_url;
      while (!target.empty() && target.back() == '/') target.pop_back();
      target += path;
    }
    const auto [host, resource] = SplitBaseUrl(target);
    httplib::Client client(host);
    const auto timeout = std::chrono::duration<double>(endpoint.timeout_seconds);
    client.set_connection_timeout(
        std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(
        std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (!endpoint.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + endpoint.api_key);
    }
    HttpResult result;
    auto res = client.Post(resource.empty() ? "/" : resource, headers, body,
                           "application/json");
    if (!res) {
      result.error = httplib::to_string(res.error());
      return result;
    }
    result.status = res->status;
    result.body = res->body;
    result.retry_after = res->get_header_value("Retry-After");
    return result;
  };
}

Gateway::Gateway(GatewayOptions options)
    : options_(std::move(options)),
      slots_(std::clamp(options_.max_concurrency, 1, 1024)) {
  Require(options_.max_concurrency >= 1, ErrorKind::kInvalidArgument,
          "gateway max_concurrency must be >= 1");
  Require(options_.retry.max_attempts >= 1, ErrorKind::kInvalidArgument,
          "gateway max_attempts must be >= 1");
  if (options_.mode != GatewayMode::kLive) {
    Require(!options_.fixture_dir.empty(), ErrorKind::kValidation,
            "replay and record modes need a fixture directory");
    if (options_.mode == GatewayMode::kReplay) {
      Require(std::filesystem::is_directory(options_.fixture_dir),
              ErrorKind::kMissingFixture,
              "fixture directory not found: " + options_.fixture_dir.string());
    }
    fixtures_ = std::make_unique<FixtureStore>(options_.fixture_dir);
  }
  if (!options_.transport) options_.transport = MakeHttpTransport(options_.endpoint);
  if (!options_.sleeper) {
    options_.sleeper = [](std::chrono::milliseconds d) {
      std::this_thread::sleep_for(d);
    };
  }
}

Gateway::~Gateway() = default;

HttpResult Gateway::PostWithRetry(const std::string& path,
                                  const std::string& body) {
  const RetryPolicy& policy = options_.retry;
  auto backoff = policy.initial_backoff;
  HttpResult last;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    slots_.acquire();
    ++attempts_;
    try {
      last = options_.transport(path, body);
    } catch (...) {
      slots_.release();
      throw;
    }
    slots_.release();
    if (last.status >= 200 && last.status < 300) return last;
    if (!IsTransientStatus(last.status)) {
      Fail(ErrorKind::kTransport,
           "POST " + path + " failed with HTTP " + std::to_string(last.status) +
               ": " + last.body.substr(0, 512));
    }
    if (attempt == policy.max_attempts) break;
    options_.sleeper(std::max(backoff, RetryAfter(last.retry_after)));
    backoff = std::min(
        policy.max_backoff,
        std::chrono::milliseconds(static_cast<long long>(backoff.count() * policy.multiplier)));
  }
  Fail(ErrorKind::kTransport,
       "POST " + path + " failed after " + std::to_string(policy.max_attempts) +
           " attempts: " +
           (last.status == 0 ? last.error : "HTTP " + std::to_string(last.status)));
}

json Gateway::Exchange(const std::string& kind, const std::string& hash,
                       const std::string& path, const json& request_record,
                       const std::function<json()>& live) {
  if (options_.mode == GatewayMode::kReplay) {
    auto stored = fixtures_->Next(hash);
    if (!stored) {
      Fail(ErrorKind::kMissingFixture,
           "no " + kind + " fixture for request " + hash + " (" + path +
               ") in " + options_.fixture_dir.string());
    }
    return *stored;
  }
  json response = live();
  if (options_.mode == GatewayMode::kRecord) {
    fixtures_->Record(hash, kind, request_record, response);
  }
  return response;
}

ChatResponse Gateway::Chat(const ChatRequest& request) {
  request.Validate();
  const json stored = Exchange(
      "chat", request.Hash(), "/chat/completions", ChatRequestToJson(request),
      [&] {
        const json body = {
            {"model", options_.endpoint.chat_model},
            {"messages",
             json::array({{{"role", "system"}, {"content", request.system_prompt}},
                          {{"role", "user"}, {"content", request.user_prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens}};
        const HttpResult http = PostWithRetry("/chat/completions", body.dump());
        ChatResponse response;
        try {
          const json reply = json::parse(http.body);
          const json& choice = Field(reply, "choices", "chat").at(0);
          const json& content = choice.at("message").at("content");
          response.text = content.is_string() ? content.get<std::string>() : "";
          const std::string finish =
              choice.value("finish_reason", std::string("stop"));
          response.finish_reason = finish == "stop"     ? FinishReason::kComplete
                                   : finish == "length" ? FinishReason::kTruncated
                                                        : FinishReason::kError;
        } catch (const json::exception& e) {
          Fail(ErrorKind::kTransport,
               std::string("malformed chat completion response: ") + e.what());
        }
        if (response.finish_reason == FinishReason::kComplete &&
            response.text.empty()) {
          response.finish_reason = FinishReason::kError;
        }
        return ChatResponseToJson(response);
      });
  return ChatResponseFromJson(stored);
}

std::vector<double> Gateway::Embed(const std::string& text) {
  Require(!text.empty(), ErrorKind::kInvalidArgument, "cannot embed empty text");
  const std::string& model = options_.endpoint.embedding_model;
  const std::string hash =
      Sha256Hex(std::string("embed") + kSep + model + kSep + text);
  const json stored = Exchange(
      "embed", hash, "/embeddings", {{"model", model}, {"input", text}}, [&] {
        const json body = {{"model", model}, {"input", text}};
        const HttpResult http = PostWithRetry("/embeddings", body.dump());
        try {
          const json reply = json::parse(http.body);
          return json{{"vector", Field(reply, "data", "embeddings").at(0).at("embedding")}};
        } catch (const json::exception& e) {
          Fail(ErrorKind::kTransport,
               std::string("malformed embedding response: ") + e.what());
        }
      });
  std::vector<double> vector;
  try {
    vector = stored.at("vector").get<std::vector<double>>();
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, std::string("malformed embedding: ") + e.what());
  }
  vector = NormalizeL2(std::move(vector));
  std::lock_guard lock(dim_mu_);
  if (embedding_dim_ == 0) embedding_dim_ = vector.size();
  Require(vector.size() == embedding_dim_, ErrorKind::kValidation,
          "embedding dimension drifted from " + std::to_string(embedding_dim_) +
              " to " + std::to_string(vector.size()));
  return vector;
}

std::vector<double> Gateway::TokenLogprobs(const std::string& text) {
  Require(!text.empty(), ErrorKind::kInvalidArgument,
          "cannot score empty text");
  const std::string& model = options_.endpoint.completion_model;
  const std::string hash =
      Sha256Hex(std::string("logprobs") + kSep + model + kSep + text);
  const json stored = Exchange(
      "logprobs", hash, "/completions", {{"model", model}, {"prompt", text}}, [&] {
        const json body = {{"model", model}, {"prompt", text}, {"max_tokens", 0},
                           {"echo", true},   {"logprobs", 0}};
        const HttpResult http = PostWithRetry("/completions", body.dump());
        try {
          const json reply = json::parse(http.body);
          json values = json::array();
          for (const json& v :
               Field(reply, "choices", "completions").at(0).at("logprobs").at("token_logprobs")) {
            if (!v.is_null()) values.push_back(v);
          }
          return json{{"token_logprobs", values}};
        } catch (const json::exception& e) {
          Fail(ErrorKind::kTransport,
               std::string("malformed logprob response: ") + e.what());
        }
      });
  try {
    return stored.at("token_logprobs").get<std::vector<double>>();
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, std::string("malformed logprobs: ") + e.what());
  }
}

json Gateway::PostJson(const std::string& path, const json& body) {
  const std::string payload = body.dump();
  const std::string hash = Sha256Hex(std::string("post") + kSep + path + kSep + payload);
  const json stored = Exchange(
      "post", hash, path, {{"path", path}, {"body", body}}, [&] {
        const HttpResult http = PostWithRetry(path, payload);
        try {
          return json{{"body", json::parse(http.body)}};
        } catch (const json::exception& e) {
          Fail(ErrorKind::kTransport,
               "POST " + path + " returned invalid JSON: " + e.what());
        }
      });
  return stored.at("body");
}

}  // namespace canary
