#pragma once

#include <string>
#include <vector>

#include "schemaloop/core/types.hpp"
#include "schemaloop/grounding/embeddings.hpp"
#include "schemaloop/grounding/entailment.hpp"
#include "schemaloop/grounding/ontology.hpp"
#include "schemaloop/llm/gateway.hpp"
#include "schemaloop/prompt/templates.hpp"

namespace schemaloop::grounding {

using core::GroundingMethod;

struct GroundingCandidate {
  OntologyNode node;
  double score = 0.0;
  GroundingMethod method = GroundingMethod::Similarity;
  int rank = 0;  // 1-based
};

struct GroundingResult {
  std::vector<GroundingCandidate> candidates;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;
};

// Top-k ontology nodes by cosine(embed(label), embed(name)); ties by ascending
// xpo_id. Throws InvalidArgument for k < 1.
GroundingResult similarity_ground(const std::string& node_label, const Ontology& ontology,
                                  const EmbeddingStore& embeddings, int k);

// Candidate ontology names proposed by the model for node_label.
std::vector<std::string> infer_names(const std::string& node_label, llm::Provider& provider,
                                     const prompt::TemplateLibrary& templates,
                                     const llm::StageDecoding& decoding = {},
                                     const std::string& model_id = {});

// Names that resolve to ontology nodes, each followed by its similar nodes (one
// hop), deduplicated by xpo_id in first-mention order.
std::vector<OntologyNode> postprocess_candidates(const std::vector<std::string>& names,
                                                 const Ontology& ontology);

// Scores each candidate with premise = node_label, hypothesis = name; top-k by
// score, ties by ascending xpo_id. A failing candidate is dropped with a warning.
GroundingResult rank_by_entailment(const std::string& node_label, const std::vector<OntologyNode>& candidates,
                                   const EntailmentScorer& scorer, int k);

// infer_names -> postprocess_candidates -> rank_by_entailment.
GroundingResult inference_ground(const std::string& node_label, llm::Provider& provider,
                                 const prompt::TemplateLibrary& templates, const Ontology& ontology,
                                 const EntailmentScorer& scorer, int k,
                                 const llm::StageDecoding& decoding = {}, const std::string& model_id = {});

// Candidates in the form stored on a session.
core::GroundingQuery to_query(const GroundingResult& result, GroundingMethod method, int k);

}  // namespace schemaloop::grounding
