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

#ifndef CANARY_LLM_GATEWAY_H_
#define CANARY_LLM_GATEWAY_H_

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "json.hpp"

namespace canary {

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  std::size_t max_output_tokens = 1024;

  // Throws kInvalidArgument on an empty prompt or a bad temperature.
  void Validate() const;

  // sha256 hex of
  //   system_prompt 0x1F user_prompt 0x1F "%.6f"(temperature) 0x1F
  //   decimal(max_output_tokens)
  std::string Hash() const;
};

enum class FinishReason { kComplete, kTruncated, kError };

const char* FinishReasonName(FinishReason reason);
FinishReason ParseFinishReason(std::string_view name);

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::kComplete;
};

class ChatService {
 public:
  virtual ~ChatService() = default;
  virtual ChatResponse Chat(const ChatRequest& request) = 0;
};

class EmbeddingService {
 public:
  virtual ~EmbeddingService() = default;
  // Unit-norm vector; the dimension is fixed for the service's lifetime.
  virtual std::vector<double> Embed(const std::string& text) = 0;
};

// Scales `v` to unit L2 norm. Throws kValidation for empty, zero or
// non-finite vectors.
std::vector<double> NormalizeL2(std::vector<double> v);

struct HttpResult {
  int status = 0;  // 0 when no HTTP response arrived
  std::string body;
  std::string retry_after;
  std::string error;  // transport-level failure description
};

// POST `body` (JSON) to `path` relative to the endpoint base URL.
using HttpTransport =
    std::function<HttpResult(const std::string& path, const std::string& body)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct Endpoint {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string api_key;
  std::string chat_model = "gpt-4o-mini";
  std::string embedding_model = "text-embedding-3-small";
  std::string completion_model = "davinci-002";
  double timeout_seconds = 60.0;
};

// base_url from CANARY_API_BASE, api_key from CANARY_API_KEY, when unset in
// `endpoint`.
Endpoint ResolveEndpointFromEnv(Endpoint endpoint);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{16000};
  double multiplier = 2.0;
};

enum class GatewayMode {
  kLive,    // HTTP only
  kReplay,  // fixture store only; misses are errors
  kRecord,  // HTTP, then store every response
};

GatewayMode ParseGatewayMode(std::string_view name);

// Directory of request-hash -> response files.
//
// <hash>.json holds {"kind": ..., "request": {...}, "response": {...}} with
// two-space indentation and sorted keys. The k-th (k >= 1) repeat of the same
// request within one process prefers <hash>-<k>.json when it exists, so that
// retried prompts can replay different answers.
class FixtureStore {
 public:
  explicit FixtureStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  // Next response for `hash`; nullopt when no file exists.
  std::optional<nlohmann::json> Next(const std::string& hash);
  // Writes the file for the next occurrence of `hash`.
  void Record(const std::string& hash, const std::string& kind,
              const nlohmann::json& request, const nlohmann::json& response);

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, int> replay_seen_;
  std::map<std::string, int> record_seen_;
};

nlohmann::json ChatRequestToJson(const ChatRequest& request);
nlohmann::json ChatResponseToJson(const ChatResponse& response);
ChatResponse ChatResponseFromJson(const nlohmann::json& j);

struct GatewayOptions {
  GatewayMode mode = GatewayMode::kLive;
  Endpoint endpoint;
  std::filesystem::path fixture_dir;
  RetryPolicy retry;
  int max_concurrency = 4;
  HttpTransport transport;  // default: HTTPS client against endpoint
  Sleeper sleeper;          // default: std::this_thread::sleep_for
};

// Every network call in the library goes through this class.
//
// Wire format (OpenAI-compatible):
//   chat:   POST {base}/chat/completions
//           {"model", "messages": [{"role": "system"|"user", "content"}],
//            "temperature", "max_tokens"}
//           -> choices[0].message.content, choices[0].finish_reason
//              ("stop" -> complete, "length" -> truncated, other -> error)
//   embed:  POST {base}/embeddings {"model", "input"} -> data[0].embedding
//   logprobs: POST {base}/completions {"model", "prompt", "max_tokens": 0,
//             "echo": true, "logprobs": 0}
//             -> choices[0].logprobs.token_logprobs (first entry null)
// Requests carry "Authorization: Bearer <api_key>" when a key is set.
// Status 429 and 5xx, and transport failures, are retried with exponential
// backoff (Retry-After seconds honoured when larger); other statuses fail at
// once with kTransport.
class Gateway : public ChatService, public EmbeddingService {
 public:
  explicit Gateway(GatewayOptions options);
  ~Gateway() override;

  ChatResponse Chat(const ChatRequest& request) override;
  std::vector<double> Embed(const std::string& text) override;

  // Per-token natural-log probabilities of `text` under the completion model.
  std::vector<double> TokenLogprobs(const std::string& text);

  // Generic JSON POST with the same retry, fixture and concurrency handling.
  // `path` may be relative to the base URL or an absolute http(s) URL.
  nlohmann::json PostJson(const std::string& path, const nlohmann::json& body);

  GatewayMode mode() const { return options_.mode; }
  // HTTP attempts issued so far, including retries.
  std::size_t attempts() const { return attempts_.load(); }

 private:
  nlohmann::json Exchange(const std::string& kind, const std::string& hash,
                          const std::string& path,
                          const nlohmann::json& request_record,
                          const std::function<nlohmann::json()>& live);
  HttpResult PostWithRetry(const std::string& path, const std::string& body);

  GatewayOptions options_;
  std::unique_ptr<FixtureStore> fixtures_;
  std::counting_semaphore<1024> slots_;
  std::atomic<std::size_t> attempts_{0};
  std::mutex dim_mu_;
  std::size_t embedding_dim_ = 0;
};

// Splits "scheme://host[:port]/prefix" into ("scheme://host[:port]", "/prefix").
std::pair<std::string, std::string> SplitBaseUrl(const std::string& url);

// HTTPS/HTTP transport backed by cpp-httplib.
HttpTransport MakeHttpTransport(const Endpoint& endpoint);

}  // namespace canary

#endif  // CANARY_LLM_GATEWAY_H_
