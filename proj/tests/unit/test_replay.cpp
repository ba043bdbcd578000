#include <doctest.h>

#include <json.hpp>

#include "topoctl/replay.hpp"

using namespace topoctl;
using json = nlohmann::json;

namespace {

RunConfig agent_config() {
  RunConfig c;
  c.controller = ControllerKind::kLlmAgent;
  ProblemOverrides o;
  o.mesh = Mesh(20, 10);
  o.iterations = 40;
  c.overrides = o;
  c.seed = 1;
  return c;
}

RunResult record() { return execute_run(agent_config(), std::make_shared<AdvisoryMockClient>()); }

}  // namespace

TEST_CASE("recorded run replays bit for bit") {
  const RunResult rec = record();
  REQUIRE(rec.calls.size() == 7);
  const auto client = std::make_shared<ReplayClient>(replay_responses(rec.calls));
  const RunResult a = execute_run(rec.summary.config, client);
  const RunResult b = execute_run(rec.summary.config, client);
  CHECK(same_outcome(rec.summary, a.summary));
  CHECK(same_outcome(a.summary, b.summary));
  CHECK(a.final_rho == rec.final_rho);
  CHECK(b.final_physical == rec.final_physical);

  const ReplayReport rep = verify_replay(rec.summary, rec.calls);
  CHECK(rep.passed);
  CHECK(rep.rails_ok);
  CHECK(rep.first_divergence.empty());
  CHECK(rep.calls_checked == 7);
  CHECK(rep.notes.empty());
}

TEST_CASE("tampered response is reported at the first divergence") {
  const RunResult rec = record();
  std::vector<CallRecord> log = rec.calls;
  int target = -1;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i].gate_active && log[i].action_post_rails.params.beta < 8.0) {
      target = static_cast<int>(i);
      break;
    }
  }
  REQUIRE(target >= 0);
  json j = json::parse(*extract_json_object(*log[target].raw_response));
  j["beta"] = 64.0;
  log[target].raw_response = j.dump();

  const ReplayReport rep = verify_replay(rec.summary, log);
  CHECK_FALSE(rep.passed);
  CHECK(rep.rails_ok);
  CHECK(rep.first_divergence.find("call " + std::to_string(log[target].seq)) == 0);
  CHECK(rep.first_divergence.find("pre-rail") != std::string::npos);
  CHECK(rep.calls_checked == target + 1);
  // the gate still held in the tampered replay
  CHECK(rep.replayed_calls[target].action_post_rails.params.beta == 8.0);
}

TEST_CASE("rail violations in the log are flagged") {
  const RunResult rec = record();
  std::vector<CallRecord> log = rec.calls;
  log[2].action_post_rails.params.r_min = 3.0;
  CHECK(check_rails(log[2], rec.summary.config.agent).has_value());
  CHECK_FALSE(check_rails(rec.calls[2], rec.summary.config.agent).has_value());
  const ReplayReport rep = verify_replay(rec.summary, log);
  CHECK_FALSE(rep.rails_ok);
  CHECK_FALSE(rep.passed);
  CHECK(rep.notes.front().find("r_min increased") != std::string::npos);

  CallRecord no_obs = rec.calls[0];
  no_obs.prompt_user = "nothing";
  CHECK(check_rails(no_obs, AgentConfig{}).value().find("no observation") != std::string::npos);
}

TEST_CASE("an empty log replays as fallbacks") {
  const RunResult rec = record();
  const ReplayReport rep = verify_replay(rec.summary, {});
  CHECK_FALSE(rep.passed);
  CHECK(rep.replayed.fallback_count == 7);
  CHECK(rep.first_divergence.find("call count") == 0);
  REQUIRE_FALSE(rep.notes.empty());
  CHECK(rep.notes.back().find("every replayed call fell back") == 0);
}

TEST_CASE("response map") {
  CallRecord a;
  a.seq = 0;
  a.raw_response = "x";
  CallRecord b;
  b.seq = 1;
  const auto m = replay_responses({a, b});
  CHECK(m.at(0).value() == "x");
  CHECK_FALSE(m.at(1).has_value());
}
