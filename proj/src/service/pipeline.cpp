#include "schemaloop/service/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include <spdlog/spdlog.h>

#include "schemaloop/core/serialize.hpp"
#include "schemaloop/core/session.hpp"
#include "schemaloop/error.hpp"

namespace schemaloop::service {

using nlohmann::json;
using core::CurationEvent;
using core::SchemaSession;

Resources load_resources(const ResourcePaths& paths) {
  if (paths.provider_config.empty()) throw ConfigError("no provider config given");
  if (!std::filesystem::exists(paths.provider_config))
    throw ConfigError("provider config " + paths.provider_config.string() + " does not exist");
  Resources res;
  res.provider_config = llm::ProviderConfig::from_file(paths.provider_config);
  res.provider = llm::resolve_provider(res.provider_config);
  if (!paths.templates.empty()) res.templates = prompt::TemplateLibrary::from_file(paths.templates);
  if (!paths.ontology.empty())
    res.ontology = std::make_shared<grounding::Ontology>(grounding::Ontology::from_file(paths.ontology));
  if (!paths.embeddings.empty())
    res.embeddings =
        std::make_shared<grounding::EmbeddingStore>(grounding::EmbeddingStore::from_file(paths.embeddings));
  if (!paths.entailment_url.empty())
    res.scorer = std::make_shared<grounding::HttpEntailmentScorer>(paths.entailment_url);
  else
    res.scorer = std::make_shared<grounding::LexicalEntailmentScorer>();
  res.max_in_flight = paths.max_in_flight;
  return res;
}

CurationEvent event_from_json(const json& doc, core::Actor default_actor) {
  if (!doc.is_object()) throw MalformedPayload("curation event must be a JSON object");
  if (!doc.contains("action") || !doc.at("action").is_string())
    throw MalformedPayload("curation event needs an 'action' string");
  CurationEvent ev;
  ev.action = core::action_from_string(doc.at("action").get<std::string>());
  ev.actor = default_actor;
  if (doc.contains("actor")) {
    if (!doc.at("actor").is_string()) throw MalformedPayload("'actor' must be a string");
    ev.actor = core::actor_from_string(doc.at("actor").get<std::string>());
  }
  if (doc.contains("payload")) {
    if (!doc.at("payload").is_object()) throw MalformedPayload("'payload' must be an object");
    ev.payload = doc.at("payload");
  } else {
    ev.payload = json::object();
    for (const auto& [key, value] : doc.items())
      if (key != "action" && key != "actor") ev.payload[key] = value;
  }
  core::validate_payload(ev.action, ev.payload);
  return ev;
}

std::vector<CurationEvent> parse_edits(const json& doc) {
  const json* list = &doc;
  if (doc.is_object() && doc.contains("events")) list = &doc.at("events");
  if (!list->is_array()) throw MalformedPayload("edit file must hold an array of events");
  std::vector<CurationEvent> events;
  std::size_t index = 0;
  for (const auto& entry : *list) {
    try {
      events.push_back(event_from_json(entry));
    } catch (const MalformedPayload& e) {
      throw MalformedPayload("edit #" + std::to_string(index + 1) + ": " + e.what());
    }
    ++index;
  }
  return events;
}

std::vector<CurationEvent> load_edit_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open edit file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw MalformedPayload(path.string() + ": " + e.what());
  }
  return parse_edits(doc);
}

std::vector<std::string> apply_edits(SchemaSession& session, const std::vector<CurationEvent>& events) {
  SchemaSession work = session;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < events.size(); ++i) {
    try {
      ids.push_back(core::apply_curation(work, events[i]).event.event_id);
    } catch (const Error& e) {
      const std::string where = "edit #" + std::to_string(i + 1) + " (" + core::to_string(events[i].action) + "): ";
      if (dynamic_cast<const UnknownEntity*>(&e)) throw UnknownEntity(where + e.what());
      if (dynamic_cast<const MalformedPayload*>(&e)) throw MalformedPayload(where + e.what());
      throw;
    }
  }
  session = std::move(work);
  return ids;
}

EditHook parse_edit_hook(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size())
    throw ConfigError("--edits-after expects <stage>:<file>, got '" + spec + "'");
  try {
    return EditHook{pipeline_stage_from_string(spec.substr(0, colon)), spec.substr(colon + 1)};
  } catch (const BadStageParams& e) {
    throw ConfigError(e.what());
  }
}

PipelineResult run_pipeline(const PipelineOptions& options, const Resources& resources, store::SessionStore* store) {
  // Edit files are read and validated up front so a bad file fails before any model call.
  std::map<PipelineStage, std::vector<std::vector<CurationEvent>>> hooks;
  for (const auto& hook : options.edits) hooks[hook.after].push_back(load_edit_file(hook.file));

  PipelineResult out;
  out.session = core::create_session(options.scenario, options.session_id);
  if (store) store->save(out.session);

  for (auto stage : kAllStages) {
    if (std::find(options.stages.begin(), options.stages.end(), stage) == options.stages.end()) continue;
    json params = json::object();
    if (auto it = options.stage_params.find(stage); it != options.stage_params.end()) params = it->second;
    if (stage == PipelineStage::Grounding && !params.contains("k")) params["k"] = options.k;

    spdlog::info("running stage {}", to_string(stage));
    auto outcome = run_stage(out.session, stage, params, resources);
    out.warnings.insert(out.warnings.end(), outcome.warnings.begin(), outcome.warnings.end());
    if (outcome.partial()) {
      out.failures = outcome.failures;
      out.failed_stage = stage;
      if (store) store->save(out.session);
      return out;
    }
    for (const auto& batch : hooks[stage]) apply_edits(out.session, batch);
    if (store) store->save(out.session);
  }
  return out;
}

}  // namespace schemaloop::service
