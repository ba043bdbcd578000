#include <doctest.h>

#include <cstdlib>
#include <thread>

#include "topoctl/agent.hpp"
#include "topoctl/clients.hpp"
#include "topoctl/errors.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace topoctl;
using json = nlohmann::json;

namespace {

std::string prompt_for(double budget_fraction) {
  json obs;
  obs["iteration"] = 10;
  obs["budget_fraction"] = budget_fraction;
  return "Current solver state:\n" + obs.dump(2) + "\nRespond with the JSON action.";
}

}  // namespace

TEST_CASE("scripted client") {
  ScriptedClient c({"a", "b"});
  CHECK(c.complete({}) == "a");
  CHECK(c.complete({}) == "b");
  CHECK(c.calls() == 2);
  CHECK_THROWS_AS(c.complete({}), ClientError);
}

TEST_CASE("replay client keys on the sequence number") {
  ReplayClient c({{0, std::string("zero")}, {2, std::nullopt}});
  CompletionRequest r;
  r.seq = 0;
  CHECK(c.complete(r) == "zero");
  CHECK(c.complete(r) == "zero");
  r.seq = 1;
  CHECK_THROWS_AS(c.complete(r), ClientError);
  r.seq = 2;
  CHECK_THROWS_AS(c.complete(r), ClientError);
}

TEST_CASE("advisory mock follows the schedule") {
  AdvisoryMockClient mock;
  for (double f : {0.0, 0.05, 0.2, 0.55, 0.8, 1.0}) {
    const std::string user = prompt_for(f);
    const std::string reply = mock.complete({"", user, 200, 0, 0});
    const auto a = parse_action(reply);
    CHECK(a.params == schedule_at_fraction(f));
    CHECK_FALSE(a.restart);
  }
  CHECK_THROWS_AS(mock.complete({"", "nothing", 200, 0, 0}), ClientError);
}

TEST_CASE("live client request body") {
  LiveClientConfig cfg;
  cfg.model = "some-model";
  LiveHttpClient c(cfg);
  const auto body = json::parse(c.request_body({"sys", "usr", 200, 0, 0}));
  CHECK(body.at("model") == "some-model");
  CHECK(body.at("max_tokens") == 200);
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("messages").size() == 2);
  CHECK(body.at("messages")[0].at("role") == "system");
  CHECK(body.at("messages")[1].at("content") == "usr");
}

TEST_CASE("live client against a local server") {
  httplib::Server server;
  std::string seen_auth;
  json seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = json::parse(req.body);
    if (seen_body.at("messages")[1].at("content") == "fail") {
      res.status = 500;
      res.set_content("boom", "text/plain");
      return;
    }
    if (seen_body.at("messages")[1].at("content") == "garbage") {
      res.set_content("{\"nothing\": 1}", "application/json");
      return;
    }
    json out;
    out["choices"] = json::array({{{"message", {{"role", "assistant"}, {"content", "{\"p\": 3}"}}}}});
    res.set_content(out.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("TOPOCTL_TEST_KEY", "secret", 1);
  LiveClientConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.model = "m";
  cfg.api_key_env = "TOPOCTL_TEST_KEY";
  cfg.timeout_s = 5.0;
  LiveHttpClient c(cfg);
  CHECK(c.complete({"s", "u", 200, 0, 0}) == "{\"p\": 3}");
  CHECK(seen_auth == "Bearer secret");
  CHECK(seen_body.at("model") == "m");
  CHECK_THROWS_AS(c.complete({"s", "fail", 200, 0, 0}), ClientError);
  CHECK_THROWS_AS(c.complete({"s", "garbage", 200, 0, 0}), ClientError);

  LiveClientConfig wrong = cfg;
  wrong.path = "/missing";
  CHECK_THROWS_AS(LiveHttpClient(wrong).complete({"s", "u", 200, 0, 0}), ClientError);

  server.stop();
  th.join();

  // nothing listening any more
  CHECK_THROWS_AS(c.complete({"s", "u", 200, 0, 0}), ClientError);

  LiveClientConfig nokey = cfg;
  nokey.api_key_env = "TOPOCTL_TEST_KEY_UNSET";
  ::unsetenv("TOPOCTL_TEST_KEY_UNSET");
  CHECK_THROWS_AS(LiveHttpClient(nokey).complete({"s", "u", 200, 0, 0}), ClientError);
}
