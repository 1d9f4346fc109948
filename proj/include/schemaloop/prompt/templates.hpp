#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace schemaloop::prompt {

enum class TemplateStage { StepGeneration, NodeExtraction, RelationQuestion, GroundingInference };

std::string to_string(TemplateStage stage);
TemplateStage template_stage_from_string(const std::string& s);

struct PromptTemplate {
  std::string template_id;
  TemplateStage stage = TemplateStage::StepGeneration;
  std::string body;  // placeholders are written {name}
  std::vector<std::string> placeholders;

  bool operator==(const PromptTemplate&) const = default;
};

// Names of every {placeholder} occurring in body, in first-occurrence order.
std::vector<std::string> scan_placeholders(const std::string& body);

using Params = std::map<std::string, std::string>;

// Single-pass substitution; substituted values are never re-expanded.
// Throws MissingParam for the first placeholder absent from params.
std::string substitute(const PromptTemplate& tmpl, const Params& params);

class TemplateLibrary {
 public:
  // The shipped templates: step generation (sub-steps, events-before, events-after,
  // steps-involved, step-expansion), node-extraction, temporal-relation,
  // hierarchical-relation and grounding-inference.
  static TemplateLibrary builtin();

  // JSON array of {template_id, stage, body, placeholders}.
  static TemplateLibrary from_json(const nlohmann::json& doc);
  static TemplateLibrary from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  void add(PromptTemplate tmpl);
  const PromptTemplate& get(const std::string& template_id) const;
  bool contains(const std::string& template_id) const;
  std::vector<std::string> ids() const;

  std::string render(const std::string& template_id, const Params& params) const;

 private:
  std::vector<PromptTemplate> templates_;
};

// Well-known template ids used by the pipeline stages.
inline constexpr const char* kNodeExtraction = "node-extraction";
inline constexpr const char* kTemporalRelation = "temporal-relation";
inline constexpr const char* kHierarchicalRelation = "hierarchical-relation";
inline constexpr const char* kGroundingInference = "grounding-inference";
inline constexpr const char* kStepExpansion = "step-expansion";

}  // namespace schemaloop::prompt
