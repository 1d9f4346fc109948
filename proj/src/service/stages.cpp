#include "schemaloop/service/stages.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>

#include <spdlog/spdlog.h>

#include "schemaloop/core/serialize.hpp"
#include "schemaloop/core/session.hpp"
#include "schemaloop/error.hpp"
#include "schemaloop/graph/builder.hpp"
#include "schemaloop/grounding/grounding.hpp"
#include "schemaloop/prompt/parsers.hpp"
#include "schemaloop/util/text.hpp"

namespace schemaloop::service {

using nlohmann::json;
using core::Action;
using core::Actor;
using core::SchemaSession;

std::string to_string(PipelineStage stage) {
  switch (stage) {
    case PipelineStage::StepGeneration: return "step-generation";
    case PipelineStage::NodeExtraction: return "node-extraction";
    case PipelineStage::GraphConstruction: return "graph-construction";
    case PipelineStage::Grounding: return "grounding";
  }
  return "unknown";
}

PipelineStage pipeline_stage_from_string(const std::string& s) {
  const auto v = text::to_lower(text::trim(s));
  if (v == "step-generation" || v == "steps") return PipelineStage::StepGeneration;
  if (v == "node-extraction" || v == "nodes") return PipelineStage::NodeExtraction;
  if (v == "graph-construction" || v == "graph") return PipelineStage::GraphConstruction;
  if (v == "grounding" || v == "node-grounding") return PipelineStage::Grounding;
  throw BadStageParams("unknown stage '" + s + "'");
}

namespace {

std::string complete(const Resources& res, const std::string& stage, const std::string& prompt) {
  if (!res.provider) throw ConfigError("no LLM provider configured");
  const auto decoding = res.provider_config.decoding_for(stage);
  llm::CompletionRequest request;
  request.prompt = prompt;
  request.model_id = res.provider_config.model_id;
  request.temperature = decoding.temperature;
  request.max_tokens = decoding.max_tokens;
  request.stop_sequences = decoding.stop_sequences;
  return res.provider->complete(request).text;
}

json failure(const std::string& item, const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  return json{{"item", item}, {"code", err ? err->code() : "internal_error"}, {"message", e.what()}};
}

template <typename T>
T param_or(const json& params, const char* key, T fallback) {
  if (!params.contains(key) || params.at(key).is_null()) return fallback;
  try {
    return params.at(key).get<T>();
  } catch (const json::exception&) {
    throw BadStageParams(std::string("parameter '") + key + "' has the wrong type");
  }
}

std::vector<std::string> id_list(const json& params, const char* key) {
  std::vector<std::string> ids;
  if (!params.contains(key)) return ids;
  const auto& v = params.at(key);
  if (!v.is_array()) throw BadStageParams(std::string("'") + key + "' must be an array of ids");
  for (const auto& id : v) {
    if (!id.is_string()) throw BadStageParams(std::string("'") + key + "' must be an array of ids");
    ids.push_back(id.get<std::string>());
  }
  return ids;
}

void check_keys(const json& params, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : params.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw BadStageParams("unknown parameter '" + key + "'");
  }
}

core::ApplyResult record(SchemaSession& session, Action action, json payload, StageOutcome& out) {
  auto applied = core::apply_curation(session, core::make_event(Actor::Model, action, std::move(payload)));
  out.event_ids.push_back(applied.event.event_id);
  return applied;
}

// ---------------------------------------------------------------------------

StageOutcome run_step_generation(SchemaSession& session, const json& params, const Resources& res) {
  check_keys(params, {"template_id", "params", "count", "parent_step_id"});
  StageOutcome out;
  const auto template_id = param_or<std::string>(params, "template_id", "sub-steps");
  if (!res.templates.contains(template_id)) throw BadStageParams("unknown template '" + template_id + "'");
  if (res.templates.get(template_id).stage != prompt::TemplateStage::StepGeneration)
    throw BadStageParams("template '" + template_id + "' is not a step-generation template");

  prompt::Params tp = param_or<prompt::Params>(params, "params", {});
  if (!tp.count("scenario")) tp["scenario"] = session.scenario;
  const auto parent = param_or<std::optional<std::string>>(params, "parent_step_id", std::nullopt);
  if (parent) {
    const auto* st = session.find_step(*parent);
    if (!st) throw UnknownEntity("unknown step '" + *parent + "'");
    if (!tp.count("step")) tp["step"] = st->text;
  }
  const int count = param_or<int>(params, "count", 0);
  if (count < 0) throw BadStageParams("count must be positive");

  std::string rendered;
  try {
    rendered = res.templates.render(template_id, tp);
  } catch (const MissingParam& e) {
    throw BadStageParams(e.what());
  }
  const auto completion = complete(res, "step-generation", rendered);
  const bool primed = text::trim(rendered).ends_with("1.");
  auto items = prompt::parse_numbered_list(completion, primed ? "1." : "");
  if (count > 0 && items.size() > static_cast<std::size_t>(count)) items.resize(static_cast<std::size_t>(count));
  if (items.empty()) out.warnings.push_back("completion for '" + template_id + "' contained no steps");

  json steps = json::array();
  for (const auto& item : items) {
    json s = {{"text", item}};
    if (parent) s["parent_step_id"] = *parent;
    steps.push_back(std::move(s));
  }
  auto applied = record(session, Action::GenerateSteps,
                        json{{"template_id", template_id}, {"prompt", rendered}, {"steps", std::move(steps)}}, out);
  out.result["steps"] = applied.changed.value("steps", json::array());
  return out;
}

StageOutcome run_node_extraction(SchemaSession& session, const json& params, const Resources& res,
                                 const ProgressFn& progress) {
  check_keys(params, {"step_ids", "method"});
  StageOutcome out;
  const auto method = param_or<std::string>(params, "method", "llm");
  if (method != "llm") throw BadStageParams("unsupported extraction method '" + method + "'");
  auto step_ids = id_list(params, "step_ids");
  if (!params.contains("step_ids"))
    for (const auto& st : session.steps)
      if (st.selected) step_ids.push_back(st.step_id);
  for (const auto& id : step_ids)
    if (!session.find_step(id)) throw UnknownEntity("unknown step '" + id + "'");

  json nodes = json::array();
  json per_step = json::object();
  std::size_t done = 0;
  for (const auto& id : step_ids) {
    const std::string sentence = session.find_step(id)->text;
    try {
      const auto rendered = res.templates.render(prompt::kNodeExtraction, {{"sentence", sentence}});
      const auto parsed = prompt::parse_tuples(complete(res, "node-extraction", rendered));
      json items = json::array();
      for (const auto& t : parsed.tuples)
        items.push_back({{"subject", t.subject}, {"verb", t.verb}, {"object", t.object ? json(*t.object) : json(nullptr)}});
      json payload = {{"method", method}, {"source_step_id", id}, {"nodes", std::move(items)}};
      if (!parsed.skipped.empty()) payload["skipped"] = parsed.skipped;
      for (const auto& s : parsed.skipped) out.warnings.push_back("step " + id + ": skipped malformed tuple " + s);
      auto applied = record(session, Action::ExtractNodes, std::move(payload), out);
      json created = applied.changed.value("nodes", json::array());
      per_step[id] = created;
      for (auto& n : created) nodes.push_back(n);
    } catch (const NoTuplesFound& e) {
      out.warnings.push_back("step " + id + ": " + e.what());
      per_step[id] = json::array();
    } catch (const Error& e) {
      if (dynamic_cast<const UnknownEntity*>(&e) || dynamic_cast<const MalformedPayload*>(&e)) throw;
      spdlog::warn("node extraction for {} failed: {}", id, e.what());
      out.failures.push_back(failure(id, e));
    }
    if (progress) progress(++done, step_ids.size());
  }
  if (!step_ids.empty() && out.failures.size() == step_ids.size())
    throw ProviderError("node extraction failed for every step: " + out.failures.front().at("message").get<std::string>());
  out.result["nodes"] = std::move(nodes);
  out.result["by_step"] = std::move(per_step);
  return out;
}

StageOutcome run_graph_construction(SchemaSession& session, const json& params, const Resources& res,
                                    const ProgressFn& progress) {
  check_keys(params, {"node_ids", "max_in_flight"});
  StageOutcome out;
  auto node_ids = id_list(params, "node_ids");
  if (!params.contains("node_ids"))
    for (const auto& n : session.nodes)
      if (n.selected) node_ids.push_back(n.node_id);
  std::vector<graph::NodeRef> refs;
  for (const auto& id : node_ids) {
    const auto* n = session.find_node(id);
    if (!n) throw UnknownEntity("unknown node '" + id + "'");
    refs.push_back({id, n->label});
  }
  if (refs.size() < 2) throw BadStageParams("graph construction needs at least two nodes");

  std::atomic<std::size_t> failed{0};
  std::string first_error;
  std::mutex error_mu;
  graph::RelationAsker asker = [&](const graph::NodeRef& a, const graph::NodeRef& b, prompt::Axis axis) {
    const char* tmpl = axis == prompt::Axis::Temporal ? prompt::kTemporalRelation : prompt::kHierarchicalRelation;
    try {
      auto rendered = res.templates.render(tmpl, {{"event_a", a.label}, {"event_b", b.label}});
      return prompt::parse_relation_answer(complete(res, "relation-question", rendered), axis);
    } catch (const std::exception& e) {
      ++failed;
      std::lock_guard lock(error_mu);
      if (first_error.empty()) first_error = e.what();
      throw;
    }
  };
  graph::BuildOptions options;
  options.max_in_flight = param_or<std::size_t>(params, "max_in_flight", res.max_in_flight);
  if (options.max_in_flight == 0) throw BadStageParams("max_in_flight must be positive");
  options.on_progress = progress;
  auto built = graph::build_graph(refs, asker, options);
  if (failed == built.questions_asked) throw ProviderError("every relation question failed: " + first_error);
  if (failed > 0)
    out.failures.push_back(json{{"item", "relation-questions"},
                                {"code", "llm_failure"},
                                {"message", std::to_string(failed.load()) + " of " +
                                                std::to_string(built.questions_asked) +
                                                " relation questions failed: " + first_error}});

  json edges = json::array();
  for (const auto& e : built.graph.edges)
    edges.push_back({{"source", e.source}, {"target", e.target}, {"kind", core::to_string(e.kind)}});
  json same_time = json::array();
  for (const auto& [a, b] : built.graph.same_time) same_time.push_back({a, b});
  record(session, Action::BuildGraph, json{{"node_ids", node_ids}, {"edges", edges}, {"same_time", same_time}}, out);

  out.warnings.insert(out.warnings.end(), built.warnings.begin(), built.warnings.end());
  out.result["graph"] = session.graph;
  out.result["questions_asked"] = built.questions_asked;
  return out;
}

StageOutcome run_grounding(SchemaSession& session, const json& params, const Resources& res,
                           const ProgressFn& progress) {
  check_keys(params, {"node_id", "node_ids", "method", "k"});
  StageOutcome out;
  const int k = param_or<int>(params, "k", 3);
  if (k < 1) throw BadStageParams("k must be >= 1");
  const auto method = param_or<std::string>(params, "method", "both");
  const bool use_similarity = method == "similarity" || method == "both";
  const bool use_inference = method == "inference" || method == "both";
  if (!use_similarity && !use_inference) throw BadStageParams("unknown grounding method '" + method + "'");
  if (!res.ontology) throw BadStageParams("grounding needs an ontology");
  if (use_similarity && !res.embeddings) throw BadStageParams("similarity grounding needs an embedding store");

  std::vector<std::string> node_ids = id_list(params, "node_ids");
  if (params.contains("node_id")) node_ids.insert(node_ids.begin(), param_or<std::string>(params, "node_id", ""));
  if (!params.contains("node_ids") && !params.contains("node_id"))
    for (const auto& gn : session.graph.nodes)
      if (!gn.label && session.find_node(gn.node_id)) node_ids.push_back(gn.node_id);
  for (const auto& id : node_ids)
    if (!session.find_node(id) && !session.graph.has_node(id)) throw UnknownEntity("unknown node '" + id + "'");

  grounding::LexicalEntailmentScorer lexical;
  const grounding::EntailmentScorer& scorer = res.scorer ? *res.scorer : lexical;
  const auto decoding = res.provider_config.decoding_for("grounding-inference");

  json per_node = json::object();
  std::size_t done = 0;
  const std::size_t total = node_ids.size() * ((use_similarity ? 1 : 0) + (use_inference ? 1 : 0));
  std::size_t inference_failures = 0;
  auto store = [&](const std::string& id, const grounding::GroundingResult& r, core::GroundingMethod m) {
    auto q = grounding::to_query(r, m, k);
    record(session, Action::GroundQuery,
                          json{{"node_id", id},
                               {"method", core::to_string(m)},
                               {"k", k},
                               {"candidates", q.candidates},
                               {"warnings", q.warnings}},
                          out);
    per_node[id][core::to_string(m)] = q.candidates;
    for (const auto& w : q.warnings) out.warnings.push_back(id + ": " + w);
  };
  for (const auto& id : node_ids) {
    const auto label = session.graph_label(id).value_or(session.find_node(id) ? session.find_node(id)->label : id);
    if (use_similarity) {
      store(id, grounding::similarity_ground(label, *res.ontology, *res.embeddings, k),
            core::GroundingMethod::Similarity);
      if (progress) progress(++done, total);
    }
    if (use_inference) {
      try {
        const auto r = grounding::inference_ground(label, *res.provider, res.templates, *res.ontology, scorer, k,
                                                   decoding, res.provider_config.model_id);
        store(id, r, core::GroundingMethod::Inference);
      } catch (const Error& e) {
        if (dynamic_cast<const UnknownEntity*>(&e) || dynamic_cast<const MalformedPayload*>(&e)) throw;
        spdlog::warn("inference grounding for {} failed: {}", id, e.what());
        out.failures.push_back(failure(id, e));
        ++inference_failures;
      }
      if (progress) progress(++done, total);
    }
  }
  if (!use_similarity && !node_ids.empty() && inference_failures == node_ids.size())
    throw ProviderError("inference grounding failed for every node: " +
                        out.failures.front().at("message").get<std::string>());
  out.result["groundings"] = std::move(per_node);
  return out;
}

}  // namespace

StageOutcome run_stage(SchemaSession& session, PipelineStage stage, const json& params, const Resources& resources,
                       const ProgressFn& progress) {
  const json p = params.is_null() ? json::object() : params;
  if (!p.is_object()) throw BadStageParams("stage parameters must be a JSON object");
  switch (stage) {
    case PipelineStage::StepGeneration: return run_step_generation(session, p, resources);
    case PipelineStage::NodeExtraction: return run_node_extraction(session, p, resources, progress);
    case PipelineStage::GraphConstruction: return run_graph_construction(session, p, resources, progress);
    case PipelineStage::Grounding: return run_grounding(session, p, resources, progress);
  }
  throw BadStageParams("unknown stage");
}

}  // namespace schemaloop::service
