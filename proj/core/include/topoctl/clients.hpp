#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace topoctl {

struct CompletionRequest {
  std::string_view system_text;
  std::string_view user_text;
  int output_token_cap = 200;
  int seq = 0;      // call sequence number within the run
  int attempt = 0;  // 0 for the first try, 1 for the retry
};

/// Boundary to the language model. Implementations throw ClientError when no
/// response is available. Must be safe to call from concurrent runs.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

/// Returns scripted responses in call order; throws once exhausted.
class ScriptedClient final : public CompletionClient {
 public:
  explicit ScriptedClient(std::vector<std::string> responses);
  std::string complete(const CompletionRequest& request) override;
  int calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
};

/// Delegates to a callable; handy for tests that inspect the prompt.
class FunctionClient final : public CompletionClient {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit FunctionClient(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const CompletionRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

/// Stateless mock that answers with the advisory-schedule parameters for the
/// budget fraction found in the observation, wrapped in a line of prose.
class AdvisoryMockClient final : public CompletionClient {
 public:
  std::string complete(const CompletionRequest& request) override;
};

/// Replays raw responses from a recorded call log, keyed by sequence number.
/// Missing entries and recorded failures raise ClientError.
class ReplayClient final : public CompletionClient {
 public:
  explicit ReplayClient(std::map<int, std::optional<std::string>> responses)
      : responses_(std::move(responses)) {}
  std::string complete(const CompletionRequest& request) override;

 private:
  std::map<int, std::optional<std::string>> responses_;
};

struct LiveClientConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "TOPOCTL_LLM_API_KEY";
  double timeout_s = 30.0;
  double temperature = 0.0;
};

/// Chat-completions over HTTP(S). The API key is read from the environment
/// variable named in the config at construction.
class LiveHttpClient final : public CompletionClient {
 public:
  explicit LiveHttpClient(LiveClientConfig config);
  std::string complete(const CompletionRequest& request) override;

  /// Request body sent for a prompt; exposed for tests.
  std::string request_body(const CompletionRequest& request) const;

 private:
  LiveClientConfig config_;
  std::string api_key_;
};

}  // namespace topoctl
