#include "schemaloop/service/api.hpp"

#include <functional>
#include <mutex>
#include <regex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "schemaloop/core/metrics.hpp"
#include "schemaloop/core/serialize.hpp"
#include "schemaloop/core/session.hpp"
#include "schemaloop/error.hpp"
#include "schemaloop/service/pipeline.hpp"
#include "schemaloop/store/session_store.hpp"

namespace schemaloop::service {

using nlohmann::json;

namespace {

int status_for(const std::string& code) {
  static const std::map<std::string, int> kStatus = {
      {"unknown_session", 404}, {"unknown_job", 404},      {"not_found", 404},       {"unknown_entity", 404},
      {"bad_stage_params", 400}, {"malformed_payload", 400}, {"job_in_progress", 409}, {"empty_graph", 409},
      {"llm_failure", 502},      {"storage_failure", 500},   {"internal_error", 500}};
  auto it = kStatus.find(code);
  return it == kStatus.end() ? 500 : it->second;
}

ApiError make_error(const std::string& code, const std::string& message, json detail = nullptr) {
  return ApiError{code, message, std::move(detail), status_for(code)};
}

ApiResponse error_response(const ApiError& e) { return ApiResponse{e.status, e.to_json()}; }

}  // namespace

json ApiError::to_json() const {
  json j = {{"code", code}, {"message", message}};
  if (!detail.is_null()) j["detail"] = detail;
  return json{{"error", j}};
}

const std::vector<std::string>& api_error_codes() {
  static const std::vector<std::string> kCodes = {
      "unknown_session",  "bad_stage_params", "llm_failure", "unknown_entity",  "malformed_payload", "job_in_progress",
      "unknown_job",      "not_found",        "empty_graph", "storage_failure", "internal_error"};
  return kCodes;
}

ApiError to_api_error(const std::exception& e) {
  static const std::map<std::string, std::string> kMapping = {
      {"not_found", "unknown_session"},
      {"corrupt_record", "storage_failure"},
      {"storage_failure", "storage_failure"},
      {"bad_stage_params", "bad_stage_params"},
      {"too_few_nodes", "bad_stage_params"},
      {"invalid_argument", "bad_stage_params"},
      {"missing_param", "bad_stage_params"},
      {"unknown_template", "bad_stage_params"},
      {"config_error", "bad_stage_params"},
      {"provider_error", "llm_failure"},
      {"transport_error", "llm_failure"},
      {"missing_credential", "llm_failure"},
      {"invalid_request", "llm_failure"},
      {"unknown_provider_kind", "llm_failure"},
      {"malformed_script_file", "llm_failure"},
      {"scorer_error", "llm_failure"},
      {"unknown_entity", "unknown_entity"},
      {"malformed_payload", "malformed_payload"},
      {"empty_scenario", "malformed_payload"},
      {"empty_graph", "empty_graph"},
  };
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    auto it = kMapping.find(err->code());
    if (it != kMapping.end()) return make_error(it->second, e.what());
    return make_error("internal_error", e.what());
  }
  if (dynamic_cast<const json::exception*>(&e)) return make_error("malformed_payload", e.what());
  return make_error("internal_error", e.what());
}

void parse_bind_address(const std::string& address, ServiceConfig& config) {
  if (address.empty()) return;
  auto colon = address.rfind(':');
  std::string host = colon == std::string::npos ? address : address.substr(0, colon);
  if (!host.empty()) config.host = host;
  if (colon == std::string::npos) return;
  const auto port_text = address.substr(colon + 1);
  try {
    std::size_t used = 0;
    int port = std::stoi(port_text, &used);
    if (used != port_text.size() || port < 0 || port > 65535) throw std::out_of_range("port");
    config.port = port;
  } catch (const std::exception&) {
    throw ConfigError("invalid bind address '" + address + "'");
  }
}

// ---------------------------------------------------------------------------

struct ApiService::Impl {
  struct Job {
    std::string job_id;
    std::string session_id;
    PipelineStage stage = PipelineStage::StepGeneration;
    std::string status = "queued";
    std::size_t done = 0;
    std::size_t total = 0;
    json result;
    json error;

    json to_json() const {
      json j = {{"job_id", job_id},
                {"session_id", session_id},
                {"stage", service::to_string(stage)},
                {"status", status},
                {"progress", {{"done", done}, {"total", total}}}};
      if (!result.is_null()) j["result"] = result;
      if (!error.is_null()) j["error"] = error;
      return j;
    }
  };

  ServiceConfig config;
  std::shared_ptr<const Resources> resources;
  store::SessionStore store;
  httplib::Server server;

  std::mutex jobs_mu;
  std::map<std::string, Job> jobs;
  std::map<std::string, std::string> active;  // session id -> running job id
  std::vector<std::thread> workers;
  std::uint64_t next_job = 0;

  std::mutex session_locks_mu;
  std::map<std::string, std::unique_ptr<std::mutex>> session_locks;

  Impl(ServiceConfig c, std::shared_ptr<const Resources> r)
      : config(std::move(c)), resources(std::move(r)), store(config.session_dir) {}

  std::mutex& session_lock(const std::string& id) {
    std::lock_guard guard(session_locks_mu);
    auto& slot = session_locks[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
  }

  bool job_running(const std::string& session_id) {
    std::lock_guard guard(jobs_mu);
    return active.count(session_id) > 0;
  }

  void require_session(const std::string& id) {
    if (!store.exists(id)) throw NotFound("unknown session '" + id + "'");
  }

  static json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    try {
      return json::parse(body);
    } catch (const json::exception& e) {
      throw MalformedPayload(std::string("request body is not JSON: ") + e.what());
    }
  }

  ApiResponse create_session(const std::string& body) {
    auto doc = parse_body(body);
    if (!doc.is_object() || !doc.contains("scenario") || !doc.at("scenario").is_string())
      throw MalformedPayload("expected {\"scenario\": string}");
    std::optional<std::string> id;
    if (doc.contains("session_id")) {
      if (!doc.at("session_id").is_string()) throw MalformedPayload("'session_id' must be a string");
      id = doc.at("session_id").get<std::string>();
      if (store.exists(*id)) throw MalformedPayload("session '" + *id + "' already exists");
    }
    auto session = core::create_session(doc.at("scenario").get<std::string>(), id);
    std::lock_guard guard(session_lock(session.session_id));
    store.save(session);
    return ApiResponse{201, json(session)};
  }

  ApiResponse get_session(const std::string& id) {
    require_session(id);
    auto loaded = store.load(id);
    json body = loaded.session;
    if (!loaded.warnings.empty()) body["warnings"] = loaded.warnings;
    return ApiResponse{200, body};
  }

  ApiResponse post_event(const std::string& id, const std::string& body) {
    require_session(id);
    auto event = event_from_json(parse_body(body));
    if (event.action == core::Action::CreateSession) throw MalformedPayload("sessions are created with POST /sessions");
    if (job_running(id)) return error_response(make_error("job_in_progress", "a stage job is running for " + id));
    std::lock_guard guard(session_lock(id));
    auto loaded = store.load(id);
    auto applied = core::apply_curation(loaded.session, std::move(event));
    store.save(loaded.session);
    return ApiResponse{200, json{{"event_id", applied.event.event_id},
                                 {"event", applied.event},
                                 {"changed", applied.changed}}};
  }

  ApiResponse start_stage(const std::string& id, const std::string& stage_name, const std::string& body) {
    const auto stage = pipeline_stage_from_string(stage_name);
    auto params = parse_body(body);
    if (!params.is_object()) throw BadStageParams("stage parameters must be a JSON object");
    require_session(id);

    std::string job_id;
    {
      std::lock_guard guard(jobs_mu);
      if (active.count(id))
        return error_response(make_error("job_in_progress", "job " + active[id] + " is running for " + id));
      job_id = "job-" + std::to_string(++next_job);
      Job job;
      job.job_id = job_id;
      job.session_id = id;
      job.stage = stage;
      jobs[job_id] = job;
      active[id] = job_id;
      workers.emplace_back([this, job_id, id, stage, params] { run_job(job_id, id, stage, params); });
    }
    return ApiResponse{202, json{{"job_id", job_id}}};
  }

  void update_job(const std::string& job_id, const std::function<void(Job&)>& fn) {
    std::lock_guard guard(jobs_mu);
    fn(jobs.at(job_id));
  }

  void run_job(const std::string& job_id, const std::string& session_id, PipelineStage stage, const json& params) {
    update_job(job_id, [](Job& j) { j.status = "running"; });
    try {
      std::lock_guard guard(session_lock(session_id));
      auto loaded = store.load(session_id);
      auto outcome = run_stage(loaded.session, stage, params, *resources, [&](std::size_t done, std::size_t total) {
        update_job(job_id, [&](Job& j) {
          j.done = done;
          j.total = total;
        });
      });
      store.save(loaded.session);
      auto warnings = loaded.warnings;
      warnings.insert(warnings.end(), outcome.warnings.begin(), outcome.warnings.end());
      json result = {{"stage", service::to_string(stage)},
                     {"entities", outcome.result},
                     {"warnings", warnings},
                     {"event_ids", outcome.event_ids}};
      update_job(job_id, [&](Job& j) {
        j.result = result;
        if (outcome.partial()) {
          j.status = "failed";
          j.error = make_error("llm_failure", "some model calls failed; partial results were kept",
                               json{{"failures", outcome.failures}})
                        .to_json()
                        .at("error");
        } else {
          j.status = "succeeded";
        }
      });
    } catch (const std::exception& e) {
      auto err = to_api_error(e);
      spdlog::warn("job {} failed: {}", job_id, e.what());
      update_job(job_id, [&](Job& j) {
        j.status = "failed";
        j.error = err.to_json().at("error");
      });
    }
    {
      std::lock_guard guard(jobs_mu);
      active.erase(session_id);
    }
  }

  ApiResponse get_job(const std::string& job_id) {
    std::lock_guard guard(jobs_mu);
    auto it = jobs.find(job_id);
    if (it == jobs.end()) return error_response(make_error("unknown_job", "unknown job '" + job_id + "'"));
    return ApiResponse{200, it->second.to_json()};
  }

  ApiResponse get_export(const std::string& id) {
    require_session(id);
    return ApiResponse{200, store::export_schema(store.load(id).session)};
  }

  ApiResponse get_metrics(const std::string& id, const std::map<std::string, std::string>& query) {
    require_session(id);
    int k = 3;
    if (auto it = query.find("k"); it != query.end()) {
      try {
        k = std::stoi(it->second);
      } catch (const std::exception&) {
        throw MalformedPayload("k must be an integer");
      }
      if (k < 1) throw MalformedPayload("k must be >= 1");
    }
    return ApiResponse{200, json(core::evaluate(store.load(id).session, k))};
  }

  ApiResponse dispatch(const std::string& method, const std::string& path, const std::string& body,
                       const std::map<std::string, std::string>& query) {
    static const std::regex kSession(R"(^/sessions/([A-Za-z0-9_-]+)$)");
    static const std::regex kStage(R"(^/sessions/([A-Za-z0-9_-]+)/stages/([A-Za-z-]+)$)");
    static const std::regex kEvents(R"(^/sessions/([A-Za-z0-9_-]+)/events$)");
    static const std::regex kExport(R"(^/sessions/([A-Za-z0-9_-]+)/export$)");
    static const std::regex kMetrics(R"(^/sessions/([A-Za-z0-9_-]+)/metrics$)");
    static const std::regex kJob(R"(^/jobs/([A-Za-z0-9_-]+)$)");
    std::smatch m;
    if (method == "GET" && path == "/healthz") return ApiResponse{200, json{{"status", "ok"}}};
    if (method == "POST" && path == "/sessions") return create_session(body);
    if (method == "GET" && path == "/sessions") return ApiResponse{200, json{{"sessions", store.list()}}};
    if (method == "GET" && std::regex_match(path, m, kSession)) return get_session(m[1]);
    if (method == "POST" && std::regex_match(path, m, kStage)) return start_stage(m[1], m[2], body);
    if (method == "POST" && std::regex_match(path, m, kEvents)) return post_event(m[1], body);
    if (method == "GET" && std::regex_match(path, m, kExport)) return get_export(m[1]);
    if (method == "GET" && std::regex_match(path, m, kMetrics)) return get_metrics(m[1], query);
    if (method == "GET" && std::regex_match(path, m, kJob)) return get_job(m[1]);
    return error_response(make_error("not_found", "no route for " + method + " " + path));
  }
};

ApiService::ApiService(ServiceConfig config, std::shared_ptr<const Resources> resources)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(resources))) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    auto r = handle(req.method, req.path, req.body, query);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto& server = impl_->server;
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Get(".*", route);
  server.Post(".*", route);
  server.Put(".*", route);
  server.Delete(".*", route);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

ApiService::~ApiService() {
  stop();
  wait_for_jobs();
}

ApiResponse ApiService::handle(const std::string& method, const std::string& path, const std::string& body,
                               const std::map<std::string, std::string>& query) {
  try {
    return impl_->dispatch(method, path, body, query);
  } catch (const std::exception& e) {
    return error_response(to_api_error(e));
  }
}

int ApiService::bind() {
  auto& c = impl_->config;
  if (c.port == 0) {
    int port = impl_->server.bind_to_any_port(c.host);
    if (port < 0) throw ConfigError("cannot bind " + c.host);
    c.port = port;
  } else if (!impl_->server.bind_to_port(c.host, c.port)) {
    throw ConfigError("cannot bind " + c.host + ":" + std::to_string(c.port));
  }
  return c.port;
}

void ApiService::serve() { impl_->server.listen_after_bind(); }

void ApiService::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void ApiService::wait_for_jobs() {
  for (;;) {
    std::vector<std::thread> workers;
    {
      std::lock_guard guard(impl_->jobs_mu);
      workers.swap(impl_->workers);
    }
    if (workers.empty()) return;
    for (auto& t : workers)
      if (t.joinable()) t.join();
  }
}

}  // namespace schemaloop::service
