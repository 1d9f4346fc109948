#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaloop/core/types.hpp"
#include "schemaloop/grounding/embeddings.hpp"
#include "schemaloop/grounding/entailment.hpp"
#include "schemaloop/grounding/ontology.hpp"
#include "schemaloop/llm/gateway.hpp"
#include "schemaloop/prompt/templates.hpp"

namespace schemaloop::service {

enum class PipelineStage { StepGeneration, NodeExtraction, GraphConstruction, Grounding };

inline constexpr PipelineStage kAllStages[] = {PipelineStage::StepGeneration, PipelineStage::NodeExtraction,
                                               PipelineStage::GraphConstruction, PipelineStage::Grounding};

std::string to_string(PipelineStage stage);
// Accepts canonical names and the short aliases steps, nodes, graph, grounding.
// Throws BadStageParams.
PipelineStage pipeline_stage_from_string(const std::string& s);

// Everything a stage needs besides the session. Shared read-only between jobs.
struct Resources {
  std::shared_ptr<llm::Provider> provider;
  llm::ProviderConfig provider_config;
  prompt::TemplateLibrary templates = prompt::TemplateLibrary::builtin();
  std::shared_ptr<const grounding::Ontology> ontology;
  std::shared_ptr<const grounding::EmbeddingStore> embeddings;
  std::shared_ptr<const grounding::EntailmentScorer> scorer;
  std::size_t max_in_flight = 4;
};

struct StageOutcome {
  nlohmann::json result = nlohmann::json::object();
  std::vector<std::string> warnings;
  // Items whose model call failed: {"item", "code", "message"}.
  std::vector<nlohmann::json> failures;
  std::vector<std::string> event_ids;

  bool partial() const { return !failures.empty(); }
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

// Runs one stage and records its output on the session as model events.
// Params per stage:
//   step-generation:    {template_id="sub-steps", params={}, count, parent_step_id}
//   node-extraction:    {step_ids=<selected steps>, method="llm"}
//   graph-construction: {node_ids=<selected nodes>, max_in_flight}
//   grounding:          {node_id | node_ids=<graph event nodes>, method="both", k=3}
// Throws BadStageParams, UnknownEntity, and provider errors when nothing was produced.
StageOutcome run_stage(core::SchemaSession& session, PipelineStage stage, const nlohmann::json& params,
                       const Resources& resources, const ProgressFn& progress = {});

}  // namespace schemaloop::service
