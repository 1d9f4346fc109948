#include "schemaloop/grounding/grounding.hpp"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "schemaloop/error.hpp"
#include "schemaloop/prompt/parsers.hpp"

namespace schemaloop::grounding {

namespace {

void check_k(int k) {
  if (k < 1) throw InvalidArgument("k must be >= 1");
}

void rank_top_k(std::vector<GroundingCandidate>& list, int k) {
  std::sort(list.begin(), list.end(), [](const GroundingCandidate& a, const GroundingCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node.xpo_id < b.node.xpo_id;
  });
  if (list.size() > static_cast<std::size_t>(k)) list.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < list.size(); ++i) list[i].rank = static_cast<int>(i) + 1;
}

}  // namespace

GroundingResult similarity_ground(const std::string& node_label, const Ontology& ontology,
                                  const EmbeddingStore& embeddings, int k) {
  check_k(k);
  GroundingResult result;
  auto query = embed_phrase(embeddings, node_label);
  if (!query) {
    result.warnings.push_back("NoEmbedding: no token of '" + node_label + "' is in the embedding vocabulary");
    return result;
  }
  for (const auto& node : ontology.nodes()) {
    auto v = embed_phrase(embeddings, node.name);
    if (!v) continue;
    result.candidates.push_back(GroundingCandidate{node, cosine(*query, *v), GroundingMethod::Similarity, 0});
  }
  rank_top_k(result.candidates, k);
  return result;
}

std::vector<std::string> infer_names(const std::string& node_label, llm::Provider& provider,
                                     const prompt::TemplateLibrary& templates,
                                     const llm::StageDecoding& decoding, const std::string& model_id) {
  llm::CompletionRequest request;
  request.prompt = templates.render(prompt::kGroundingInference, {{"event", node_label}});
  request.model_id = model_id;
  request.temperature = decoding.temperature;
  request.max_tokens = decoding.max_tokens;
  request.stop_sequences = decoding.stop_sequences;
  auto completion = provider.complete(request);
  return prompt::parse_name_list(completion.text);
}

std::vector<OntologyNode> postprocess_candidates(const std::vector<std::string>& names, const Ontology& ontology) {
  std::vector<OntologyNode> out;
  std::set<std::string> seen;
  auto push = [&](const OntologyNode& n) {
    if (seen.insert(n.xpo_id).second) out.push_back(n);
  };
  for (const auto& name : names) {
    const OntologyNode* node = ontology.find_by_name(name);
    if (!node) continue;
    push(*node);
    for (const auto& similar : node->similar_names)
      if (const OntologyNode* s = ontology.find_by_name(similar)) push(*s);
  }
  return out;
}

GroundingResult rank_by_entailment(const std::string& node_label, const std::vector<OntologyNode>& candidates,
                                   const EntailmentScorer& scorer, int k) {
  check_k(k);
  GroundingResult result;
  for (const auto& node : candidates) {
    try {
      double s = scorer.score(node_label, node.name);
      result.candidates.push_back(GroundingCandidate{node, s, GroundingMethod::Inference, 0});
    } catch (const std::exception& e) {
      auto msg = "entailment scoring failed for '" + node.name + "': " + e.what();
      spdlog::warn("{}", msg);
      result.warnings.push_back(std::move(msg));
    }
  }
  if (!candidates.empty() && result.candidates.empty())
    result.errors.push_back("entailment scoring failed for every candidate of '" + node_label + "'");
  rank_top_k(result.candidates, k);
  return result;
}

GroundingResult inference_ground(const std::string& node_label, llm::Provider& provider,
                                 const prompt::TemplateLibrary& templates, const Ontology& ontology,
                                 const EntailmentScorer& scorer, int k, const llm::StageDecoding& decoding,
                                 const std::string& model_id) {
  check_k(k);
  auto names = infer_names(node_label, provider, templates, decoding, model_id);
  auto result = rank_by_entailment(node_label, postprocess_candidates(names, ontology), scorer, k);
  if (result.candidates.empty() && result.errors.empty())
    result.warnings.push_back("no inferred name for '" + node_label + "' matched the ontology");
  return result;
}

core::GroundingQuery to_query(const GroundingResult& result, GroundingMethod method, int k) {
  core::GroundingQuery q;
  q.method = method;
  q.k = k;
  for (const auto& c : result.candidates) q.candidates.push_back(core::CandidateRecord{c.node.xpo_id, c.node.name, c.score, c.rank});
  q.warnings = result.warnings;
  q.warnings.insert(q.warnings.end(), result.errors.begin(), result.errors.end());
  return q;
}

}  // namespace schemaloop::grounding
