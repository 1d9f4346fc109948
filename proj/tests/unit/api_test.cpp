#include <future>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "schemaloop/core/serialize.hpp"
#include "schemaloop/error.hpp"
#include "schemaloop/service/api.hpp"
#include "schemaloop/service/pipeline.hpp"
#include "support.hpp"

using namespace schemaloop;
using namespace schemaloop::service;
using nlohmann::json;

namespace {

// Holds every completion until released, so a job can be observed mid-flight.
class GatedProvider final : public llm::Provider {
 public:
  GatedProvider(std::shared_ptr<llm::Provider> inner, std::shared_future<void> gate)
      : inner_(std::move(inner)), gate_(std::move(gate)) {}
  llm::CompletionResult complete(const llm::CompletionRequest& request) override {
    gate_.wait();
    return inner_->complete(request);
  }
  std::string provider_id() const override { return inner_->provider_id(); }

 private:
  std::shared_ptr<llm::Provider> inner_;
  std::shared_future<void> gate_;
};

class ApiTest : public ::testing::Test {
 protected:
  void SetUp() override { start(load_resources(testsupport::case_study_paths())); }

  void start(Resources res) {
    api.reset();
    ServiceConfig config;
    config.session_dir = dir.path();
    config.port = 0;
    api = std::make_unique<ApiService>(config, std::make_shared<const Resources>(std::move(res)));
  }

  ApiResponse call(const std::string& method, const std::string& path, const json& body = nullptr,
                   const std::map<std::string, std::string>& query = {}) {
    return api->handle(method, path, body.is_null() ? "" : body.dump(), query);
  }

  std::string new_session(const std::string& id = "s1", const std::string& scenario = "cyber attack") {
    auto r = call("POST", "/sessions", {{"scenario", scenario}, {"session_id", id}});
    EXPECT_EQ(r.status, 201) << r.body;
    return r.body.at("session_id");
  }

  json run_job(const std::string& session, const std::string& stage, const json& params = json::object()) {
    auto r = call("POST", "/sessions/" + session + "/stages/" + stage, params);
    EXPECT_EQ(r.status, 202) << r.body;
    api->wait_for_jobs();
    return call("GET", "/jobs/" + r.body.at("job_id").get<std::string>()).body;
  }

  void post_edits(const std::string& session, const std::string& file) {
    for (const auto& ev : testsupport::read_json(testsupport::fixture(file))) {
      auto r = call("POST", "/sessions/" + session + "/events", ev);
      ASSERT_EQ(r.status, 200) << r.body;
    }
  }

  static void expect_error(const ApiResponse& r, int status, const std::string& code) {
    EXPECT_EQ(r.status, status) << r.body;
    ASSERT_TRUE(r.body.contains("error")) << r.body;
    EXPECT_EQ(r.body["error"]["code"], code);
    EXPECT_TRUE(r.body["error"]["message"].is_string());
  }

  testsupport::TempDir dir;
  std::unique_ptr<ApiService> api;
};

}  // namespace

TEST_F(ApiTest, Health) {
  auto r = call("GET", "/healthz");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["status"], "ok");
}

TEST_F(ApiTest, SessionLifecycle) {
  EXPECT_EQ(call("GET", "/sessions").body["sessions"], json::array());
  auto id = new_session();
  EXPECT_EQ(call("GET", "/sessions").body["sessions"], json{"s1"});
  auto got = call("GET", "/sessions/s1");
  EXPECT_EQ(got.status, 200);
  EXPECT_EQ(got.body["scenario"], "cyber attack");
  EXPECT_EQ(got.body["curation_log"].size(), 1u);

  auto generated = call("POST", "/sessions", {{"scenario", "flood"}});
  EXPECT_EQ(generated.status, 201);
  EXPECT_NE(generated.body["session_id"], id);
  expect_error(call("POST", "/sessions", {{"scenario", "again"}, {"session_id", "s1"}}), 400, "malformed_payload");
  expect_error(call("POST", "/sessions", {{"name", "x"}}), 400, "malformed_payload");
  expect_error(call("POST", "/sessions", {{"scenario", "  "}}), 400, "malformed_payload");
  expect_error(api->handle("POST", "/sessions", "{oops"), 400, "malformed_payload");
}

TEST_F(ApiTest, CaseStudyOverTheApi) {
  new_session();
  auto steps = run_job("s1", "step-generation");
  EXPECT_EQ(steps["status"], "succeeded") << steps;
  EXPECT_EQ(steps["result"]["entities"]["steps"].size(), 5u);
  post_edits("s1", "case_study/edits_steps.json");
  EXPECT_EQ(run_job("s1", "node-extraction")["status"], "succeeded");
  post_edits("s1", "case_study/edits_nodes.json");
  auto graph = run_job("s1", "graph-construction");
  EXPECT_EQ(graph["status"], "succeeded");
  EXPECT_EQ(graph["progress"], (json{{"done", 24}, {"total", 24}}));
  post_edits("s1", "case_study/edits_graph.json");
  EXPECT_EQ(run_job("s1", "grounding")["status"], "succeeded");
  post_edits("s1", "case_study/edits_grounding.json");

  auto exported = call("GET", "/sessions/s1/export");
  EXPECT_EQ(exported.status, 200);
  EXPECT_EQ(exported.body, testsupport::read_json(testsupport::fixture("case_study/golden_export.json")));

  auto metrics = call("GET", "/sessions/s1/metrics");
  EXPECT_EQ(metrics.status, 200);
  EXPECT_TRUE(metrics.body.contains("step_accuracy")) << metrics.body;
  EXPECT_EQ(call("GET", "/sessions/s1/metrics", nullptr, {{"k", "1"}}).status, 200);
  expect_error(call("GET", "/sessions/s1/metrics", nullptr, {{"k", "zero"}}), 400, "malformed_payload");
  expect_error(call("GET", "/sessions/s1/metrics", nullptr, {{"k", "0"}}), 400, "malformed_payload");
}

TEST_F(ApiTest, ReadsDoNotMutate) {
  new_session();
  run_job("s1", "steps");
  const auto before = testsupport::read_text(dir.path() / "s1.json");
  call("GET", "/sessions/s1");
  call("GET", "/sessions/s1/metrics");
  call("GET", "/sessions/s1/export");
  call("GET", "/sessions");
  EXPECT_EQ(testsupport::read_text(dir.path() / "s1.json"), before);
}

TEST_F(ApiTest, EventErrors) {
  new_session();
  run_job("s1", "steps");
  auto ok = call("POST", "/sessions/s1/events", {{"action", "edit-step"}, {"step_id", "step-2"}, {"text", "edited"}});
  EXPECT_EQ(ok.status, 200);
  EXPECT_EQ(ok.body["event"]["action"], "edit-step");
  EXPECT_TRUE(ok.body["event_id"].is_string());

  const auto before = call("GET", "/sessions/s1").body;
  expect_error(call("POST", "/sessions/s1/events", {{"action", "edit-step"}, {"step_id", "step-77"}, {"text", "x"}}),
               404, "unknown_entity");
  expect_error(call("POST", "/sessions/s1/events", {{"action", "edit-step"}, {"text", "x"}}), 400, "malformed_payload");
  expect_error(call("POST", "/sessions/s1/events", {{"action", "create-session"}, {"scenario", "x"}}), 400,
               "malformed_payload");
  EXPECT_EQ(call("GET", "/sessions/s1").body, before);
}

TEST_F(ApiTest, UnknownThings) {
  expect_error(call("GET", "/sessions/ghost"), 404, "unknown_session");
  expect_error(call("GET", "/sessions/ghost/export"), 404, "unknown_session");
  expect_error(call("GET", "/sessions/ghost/metrics"), 404, "unknown_session");
  expect_error(call("POST", "/sessions/ghost/events", {{"action", "select-step"}}), 404, "unknown_session");
  expect_error(call("POST", "/sessions/ghost/stages/steps"), 404, "unknown_session");
  expect_error(call("GET", "/jobs/job-404"), 404, "unknown_job");
  expect_error(call("GET", "/nowhere"), 404, "not_found");
  expect_error(call("DELETE", "/sessions"), 404, "not_found");
}

TEST_F(ApiTest, StageErrors) {
  new_session();
  expect_error(call("POST", "/sessions/s1/stages/painting"), 400, "bad_stage_params");
  expect_error(call("POST", "/sessions/s1/stages/steps", json::array()), 400, "bad_stage_params");
  expect_error(call("GET", "/sessions/s1/export"), 409, "empty_graph");

  // Problems found by the stage itself surface on the job.
  auto job = run_job("s1", "graph-construction", {{"node_ids", {"node-1"}}});
  EXPECT_EQ(job["status"], "failed");
  EXPECT_EQ(job["error"]["code"], "unknown_entity");
  job = run_job("s1", "steps", {{"count", -1}});
  EXPECT_EQ(job["status"], "failed");
  EXPECT_EQ(job["error"]["code"], "bad_stage_params");
}

TEST_F(ApiTest, ModelFailuresSurfaceAsLlmFailure) {
  auto res = load_resources(testsupport::case_study_paths());
  res.provider = std::make_shared<llm::ScriptedProvider>(llm::ScriptedProvider::Script{});
  start(std::move(res));
  new_session();
  auto job = run_job("s1", "steps");
  EXPECT_EQ(job["status"], "failed");
  EXPECT_EQ(job["error"]["code"], "llm_failure");
  EXPECT_EQ(call("GET", "/sessions/s1").body["steps"], json::array());
}

TEST_F(ApiTest, OneJobPerSession) {
  std::promise<void> release;
  auto res = load_resources(testsupport::case_study_paths());
  res.provider = std::make_shared<GatedProvider>(res.provider, release.get_future().share());
  start(std::move(res));
  new_session();
  // A different scenario, so the two jobs never compete for the same scripted reply.
  new_session("s2", "flood");

  auto first = call("POST", "/sessions/s1/stages/steps");
  ASSERT_EQ(first.status, 202);
  const std::string job = first.body["job_id"];
  const auto status = call("GET", "/jobs/" + job).body["status"];
  EXPECT_TRUE(status == "queued" || status == "running") << status;
  expect_error(call("POST", "/sessions/s1/stages/steps"), 409, "job_in_progress");
  expect_error(call("POST", "/sessions/s1/events", {{"action", "select-step"}, {"step_id", "x"}, {"selected", true}}),
               409, "job_in_progress");
  // Other sessions are unaffected.
  EXPECT_EQ(call("POST", "/sessions/s2/stages/steps").status, 202);

  release.set_value();
  api->wait_for_jobs();
  EXPECT_EQ(call("GET", "/jobs/" + job).body["status"], "succeeded");
  EXPECT_EQ(call("POST", "/sessions/s1/stages/nodes").status, 202);
  api->wait_for_jobs();
}

TEST_F(ApiTest, ErrorTaxonomyIsClosed) {
  const auto& codes = api_error_codes();
  std::set<std::string> allowed(codes.begin(), codes.end());
  std::vector<std::unique_ptr<std::exception>> samples;
  samples.push_back(std::make_unique<NotFound>("x"));
  samples.push_back(std::make_unique<CorruptRecord>("x"));
  samples.push_back(std::make_unique<StorageFailure>("x"));
  samples.push_back(std::make_unique<BadStageParams>("x"));
  samples.push_back(std::make_unique<ConfigError>("x"));
  samples.push_back(std::make_unique<UnknownEntity>("x"));
  samples.push_back(std::make_unique<MalformedPayload>("x"));
  samples.push_back(std::make_unique<EmptyGraph>("x"));
  samples.push_back(std::make_unique<ScorerError>("x"));
  samples.push_back(std::make_unique<InvalidArgument>("x"));
  samples.push_back(std::make_unique<DuplicateName>("x"));
  samples.push_back(std::make_unique<std::runtime_error>("x"));
  samples.push_back(std::make_unique<std::bad_alloc>());
  for (const auto& e : samples) {
    auto err = to_api_error(*e);
    EXPECT_TRUE(allowed.count(err.code)) << err.code;
    EXPECT_GE(err.status, 400);
  }
  EXPECT_EQ(to_api_error(NotFound("x")).code, "unknown_session");
  EXPECT_EQ(to_api_error(std::runtime_error("x")).code, "internal_error");
  EXPECT_EQ(to_api_error(UnknownEntity("x")).status, 404);
}

TEST(BindAddress, Parsing) {
  ServiceConfig c;
  parse_bind_address("0.0.0.0:9000", c);
  EXPECT_EQ(c.host, "0.0.0.0");
  EXPECT_EQ(c.port, 9000);
  parse_bind_address(":0", c);
  EXPECT_EQ(c.host, "0.0.0.0");
  EXPECT_EQ(c.port, 0);
  parse_bind_address("localhost", c);
  EXPECT_EQ(c.host, "localhost");
  for (const char* bad : {"h:x", "h:70000", "h:-1", "h:1x"}) EXPECT_THROW(parse_bind_address(bad, c), ConfigError) << bad;
}

TEST_F(ApiTest, ServesOverHttp) {
  const int port = api->bind();
  ASSERT_GT(port, 0);
  std::thread server([this] { api->serve(); });
  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(2);
  for (int i = 0; i < 100 && !client.Get("/healthz"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));

  auto created = client.Post("/sessions", R"({"scenario": "cyber attack", "session_id": "web"})", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  auto job = client.Post("/sessions/web/stages/steps", "{}", "application/json");
  ASSERT_TRUE(job);
  EXPECT_EQ(job->status, 202);
  api->wait_for_jobs();
  auto polled = client.Get(("/jobs/" + json::parse(job->body)["job_id"].get<std::string>()).c_str());
  ASSERT_TRUE(polled);
  EXPECT_EQ(json::parse(polled->body)["status"], "succeeded");
  auto metrics = client.Get("/sessions/web/metrics?k=2");
  ASSERT_TRUE(metrics);
  EXPECT_EQ(metrics->status, 200);
  auto missing = client.Get("/sessions/nope");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body)["error"]["code"], "unknown_session");
  EXPECT_EQ(missing->get_header_value("Content-Type"), "application/json");

  api->stop();
  server.join();
}
