#include "topoctl/clients.hpp"

#include <cstdlib>
#include <sstream>

#include "topoctl/agent.hpp"
#include "topoctl/controllers.hpp"
#include "topoctl/errors.hpp"

// After the Eigen-based headers: resolv.h defines _res as a macro.
#include <httplib.h>
#include <json.hpp>

namespace topoctl {

using json = nlohmann::json;

ScriptedClient::ScriptedClient(std::vector<std::string> responses)
    : responses_(std::move(responses)) {}

std::string ScriptedClient::complete(const CompletionRequest& /*request*/) {
  std::lock_guard lock(mu_);
  if (next_ >= responses_.size()) throw ClientError("scripted client exhausted");
  return responses_[next_++];
}

int ScriptedClient::calls() const {
  std::lock_guard lock(mu_);
  return static_cast<int>(next_);
}

std::string AdvisoryMockClient::complete(const CompletionRequest& request) {
  const auto object = extract_json_object(request.user_text);
  if (!object) throw ClientError("mock client: no observation in prompt");
  const json obs = json::parse(*object);
  const double f = obs.at("budget_fraction").get<double>();
  const SolverParams p = schedule_at_fraction(f);
  const int stage = advisory_stage_at(f).index;

  json action;
  action["p"] = p.p;
  action["beta"] = p.beta;
  action["rmin"] = p.r_min;
  action["move"] = p.move;
  action["restart"] = false;
  action["note"] = "stage " + std::to_string(stage) + " advisory";
  return "Following the advisory schedule.\n" + action.dump();
}

std::string ReplayClient::complete(const CompletionRequest& request) {
  const auto it = responses_.find(request.seq);
  if (it == responses_.end()) {
    throw ClientError("replay log has no call " + std::to_string(request.seq));
  }
  if (!it->second) throw ClientError("recorded call " + std::to_string(request.seq) + " failed");
  return *it->second;
}

LiveHttpClient::LiveHttpClient(LiveClientConfig config) : config_(std::move(config)) {
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

std::string LiveHttpClient::request_body(const CompletionRequest& request) const {
  json body;
  body["model"] = config_.model;
  body["temperature"] = config_.temperature;
  body["max_tokens"] = request.output_token_cap;
  body["messages"] = json::array({
      {{"role", "system"}, {"content", std::string(request.system_text)}},
      {{"role", "user"}, {"content", std::string(request.user_text)}},
  });
  return body.dump();
}

std::string LiveHttpClient::complete(const CompletionRequest& request) {
  if (api_key_.empty()) throw ClientError(config_.api_key_env + " is not set");
  httplib::Client cli(config_.base_url);
  const auto seconds = static_cast<time_t>(config_.timeout_s);
  const auto micros = static_cast<time_t>((config_.timeout_s - seconds) * 1e6);
  cli.set_connection_timeout(seconds, micros);
  cli.set_read_timeout(seconds, micros);
  cli.set_write_timeout(seconds, micros);
  const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

  const auto res = cli.Post(config_.path, headers, request_body(request), "application/json");
  if (!res) throw ClientError("HTTP request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ClientError("HTTP status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  try {
    const json j = json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ClientError(std::string("unexpected response body: ") + e.what());
  }
}

}  // namespace topoctl
