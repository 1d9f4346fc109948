// schemaloop: headless driver for the schema induction pipeline.
//
//   schemaloop run --scenario "cyber attack" --provider-config provider.json \
//       --ontology ontology.json --embeddings vectors.txt --edits-after steps:edits.json --out schema.json
//   schemaloop eval <session-id>
//   schemaloop export <session-id> --out schema.json
//   schemaloop apply-edits <session-id> edits.json
//   schemaloop serve --bind 127.0.0.1:8080

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "schemaloop/core/metrics.hpp"
#include "schemaloop/core/serialize.hpp"
#include "schemaloop/error.hpp"
#include "schemaloop/service/api.hpp"
#include "schemaloop/service/pipeline.hpp"
#include "schemaloop/store/session_store.hpp"

namespace {

using namespace schemaloop;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kPipelineError = 1;
constexpr int kConfigError = 2;

bool is_config_error(const Error& e) {
  static const std::set<std::string> kCodes = {
      "config_error",          "missing_credential",       "unknown_provider_kind", "malformed_script_file",
      "malformed_ontology_file", "malformed_embedding_file", "malformed_template_file", "duplicate_name"};
  return kCodes.count(e.code()) > 0;
}

int report(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  const std::string code = err ? err->code() : "internal_error";
  std::cerr << json{{"error", {{"code", code}, {"message", e.what()}}}}.dump() << "\n";
  return err && is_config_error(*err) ? kConfigError : kPipelineError;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageFailure("cannot write " + path);
  out << contents;
  if (!out) throw StorageFailure("write to " + path + " failed");
}

struct ResourceFlags {
  std::string provider_config;
  std::string templates;
  std::string ontology;
  std::string embeddings;
  std::string entailment_url;
  std::size_t max_in_flight = 4;

  void attach(CLI::App* cmd) {
    cmd->add_option("--provider-config", provider_config, "Provider config JSON")->envname("SCHEMA_PROVIDER_CONFIG");
    cmd->add_option("--templates", templates, "Template library JSON (default: built-in)");
    cmd->add_option("--ontology", ontology, "Ontology JSON");
    cmd->add_option("--embeddings", embeddings, "Embedding vectors (GloVe text format)");
    cmd->add_option("--entailment-url", entailment_url, "NLI service URL (default: lexical scorer)");
    cmd->add_option("--max-in-flight", max_in_flight, "Concurrent relation questions")->check(CLI::PositiveNumber);
  }

  service::ResourcePaths paths() const {
    return service::ResourcePaths{provider_config, templates, ontology, embeddings, entailment_url, max_in_flight};
  }
};

int cmd_run(const std::string& scenario, const std::vector<std::string>& stage_names,
            const std::vector<std::string>& edit_specs, const std::string& out_path, int k,
            const std::string& session_dir, const std::string& session_id, const ResourceFlags& flags) {
  service::PipelineOptions options;
  options.scenario = scenario;
  options.k = k;
  if (!session_id.empty()) options.session_id = session_id;
  if (!stage_names.empty()) {
    options.stages.clear();
    for (const auto& name : stage_names) {
      try {
        options.stages.push_back(service::pipeline_stage_from_string(name));
      } catch (const BadStageParams& e) {
        throw ConfigError(e.what());
      }
    }
  }
  for (const auto& spec : edit_specs) options.edits.push_back(service::parse_edit_hook(spec));
  const bool grounding = std::find(options.stages.begin(), options.stages.end(), service::PipelineStage::Grounding) !=
                         options.stages.end();
  if (grounding && (flags.ontology.empty() || flags.embeddings.empty()))
    throw ConfigError("the grounding stage needs --ontology and --embeddings");

  const auto resources = service::load_resources(flags.paths());
  store::SessionStore store(session_dir);
  auto result = service::run_pipeline(options, resources, &store);
  const auto& session = result.session;
  std::cout << session.session_id << "\n";
  for (const auto& w : result.warnings) spdlog::warn("{}", w);
  if (result.failed_stage) {
    std::cerr << json{{"error",
                       {{"code", "llm_failure"},
                        {"message", "stage " + service::to_string(*result.failed_stage) + " had failed model calls"},
                        {"detail", {{"failures", result.failures}}}}}}
                     .dump()
              << "\n";
    return kPipelineError;
  }
  const std::string target = out_path.empty() ? session.session_id + ".schema.json" : out_path;
  write_file(target, store::export_schema_text(session));
  spdlog::info("schema written to {}", target);
  return kOk;
}

int cmd_eval(const std::string& session_id, const std::string& session_dir, int k, bool as_json) {
  store::SessionStore store(session_dir);
  auto loaded = store.load(session_id);
  const auto report = core::evaluate(loaded.session, k);
  if (as_json)
    std::cout << json(report).dump(2) << "\n";
  else
    std::cout << core::format_report(report);
  return kOk;
}

int cmd_export(const std::string& session_id, const std::string& session_dir, const std::string& out_path) {
  store::SessionStore store(session_dir);
  const auto text = store::export_schema_text(store.load(session_id).session);
  if (out_path.empty() || out_path == "-")
    std::cout << text;
  else
    write_file(out_path, text);
  return kOk;
}

int cmd_apply_edits(const std::string& session_id, const std::string& session_dir, const std::string& edit_file) {
  const auto events = service::load_edit_file(edit_file);
  store::SessionStore store(session_dir);
  auto session = store.load(session_id).session;
  const auto ids = service::apply_edits(session, events);
  store.save(session);
  std::cout << json{{"session_id", session_id}, {"event_ids", ids}}.dump() << "\n";
  return kOk;
}

service::ApiService* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const std::string& bind, const std::string& session_dir, const ResourceFlags& flags) {
  service::ServiceConfig config;
  config.session_dir = session_dir;
  service::parse_bind_address(bind, config);
  auto resources = std::make_shared<const service::Resources>(service::load_resources(flags.paths()));
  service::ApiService api(config, resources);
  const int port = api.bind();
  spdlog::info("listening on {}:{}", config.host, port);
  std::cout << "listening on " << config.host << ":" << port << std::endl;
  g_server = &api;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  api.serve();
  g_server = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("schemaloop");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);

  CLI::App app{"Human-in-the-loop event schema induction"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");
  std::string session_dir = "sessions";
  auto add_session_dir = [&](CLI::App* cmd) {
    cmd->add_option("--session-dir", session_dir, "Session storage directory")
        ->envname("SCHEMA_SESSION_DIR")
        ->capture_default_str();
  };

  auto* run = app.add_subcommand("run", "Run the pipeline end to end and export the schema");
  std::string scenario, out_path, session_id;
  std::vector<std::string> stages, edit_specs;
  int k = 3;
  ResourceFlags run_flags;
  run->add_option("--scenario", scenario, "Scenario, e.g. \"cyber attack\"")->required();
  run->add_option("--stages", stages, "Comma-separated stages: steps,nodes,graph,grounding")->delimiter(',');
  run->add_option("--edits-after", edit_specs, "<stage>:<edit file>, repeatable");
  run->add_option("--out", out_path, "Export destination (default <session-id>.schema.json)");
  run->add_option("--k", k, "Grounding candidates per method")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--session-id", session_id, "Use this id instead of a random one");
  run_flags.attach(run);
  add_session_dir(run);

  auto* eval = app.add_subcommand("eval", "Print evaluation metrics for a stored session");
  std::string eval_id;
  int eval_k = 3;
  bool eval_json = false;
  eval->add_option("session_id", eval_id)->required();
  eval->add_option("--k", eval_k, "Top-k for grounding success")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_flag("--json", eval_json, "Emit JSON instead of a table");
  add_session_dir(eval);

  auto* exp = app.add_subcommand("export", "Write the schema document of a stored session");
  std::string export_id, export_out;
  exp->add_option("session_id", export_id)->required();
  exp->add_option("--out", export_out, "Destination file (default stdout)");
  add_session_dir(exp);

  auto* edits = app.add_subcommand("apply-edits", "Apply an edit file to a stored session (all or nothing)");
  std::string edits_id, edits_file;
  edits->add_option("session_id", edits_id)->required();
  edits->add_option("edit_file", edits_file)->required();
  add_session_dir(edits);

  auto* serve = app.add_subcommand("serve", "Start the JSON API");
  std::string bind = "127.0.0.1:8080";
  ResourceFlags serve_flags;
  serve->add_option("--bind", bind, "host:port")->envname("SCHEMA_BIND_ADDRESS")->capture_default_str();
  serve_flags.attach(serve);
  add_session_dir(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (verbose) spdlog::set_level(spdlog::level::info);

  try {
    if (*run) return cmd_run(scenario, stages, edit_specs, out_path, k, session_dir, session_id, run_flags);
    if (*eval) return cmd_eval(eval_id, session_dir, eval_k, eval_json);
    if (*exp) return cmd_export(export_id, session_dir, export_out);
    if (*edits) return cmd_apply_edits(edits_id, session_dir, edits_file);
    if (*serve) return cmd_serve(bind, session_dir, serve_flags);
  } catch (const std::exception& e) {
    return report(e);
  }
  return kConfigError;
}
