#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaloop/core/types.hpp"
#include "schemaloop/service/stages.hpp"
#include "schemaloop/store/session_store.hpp"

namespace schemaloop::service {

struct ResourcePaths {
  std::filesystem::path provider_config;
  std::filesystem::path templates;  // empty: built-in templates
  std::filesystem::path ontology;
  std::filesystem::path embeddings;
  std::string entailment_url;  // empty: lexical scorer
  std::size_t max_in_flight = 4;
};

// Loads every configured resource. Throws ConfigError and the loaders' errors.
Resources load_resources(const ResourcePaths& paths);

// Accepts {"action", "actor"?, "payload": {...}} or the flattened
// {"action", "actor"?, ...payload fields}. Throws MalformedPayload.
core::CurationEvent event_from_json(const nlohmann::json& doc, core::Actor default_actor = core::Actor::Human);

// Edit file: a JSON array of events, or {"events": [...]}. Every event is
// validated before the list is returned. Throws MalformedPayload, ConfigError.
std::vector<core::CurationEvent> load_edit_file(const std::filesystem::path& path);
std::vector<core::CurationEvent> parse_edits(const nlohmann::json& doc);

// All-or-nothing: either every event applies or the session is unchanged.
std::vector<std::string> apply_edits(core::SchemaSession& session, const std::vector<core::CurationEvent>& events);

struct EditHook {
  PipelineStage after;
  std::filesystem::path file;
};

// "<stage>:<file>" as given to --edits-after. Throws ConfigError.
EditHook parse_edit_hook(const std::string& spec);

struct PipelineOptions {
  std::string scenario;
  std::optional<std::string> session_id;
  std::vector<PipelineStage> stages{std::begin(kAllStages), std::end(kAllStages)};
  std::vector<EditHook> edits;
  std::map<PipelineStage, nlohmann::json> stage_params;
  int k = 3;
};

struct PipelineResult {
  core::SchemaSession session;
  std::vector<std::string> warnings;
  // Per-item model failures; the pipeline stops after the stage that had them.
  std::vector<nlohmann::json> failures;
  std::optional<PipelineStage> failed_stage;
};

// Runs the requested stages in pipeline order, applying edit hooks after the
// stage they name. The session is saved after every stage when a store is given.
PipelineResult run_pipeline(const PipelineOptions& options, const Resources& resources,
                            store::SessionStore* store = nullptr);

}  // namespace schemaloop::service
