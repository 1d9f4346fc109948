#include "schemaloop/core/serialize.hpp"

namespace schemaloop::core {

using nlohmann::json;

namespace {

json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> opt_str(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

#define SCHEMALOOP_ENUM_JSON(Type, parse)                                         \
  void to_json(json& j, Type v) { j = to_string(v); }                            \
  void from_json(const json& j, Type& v) { v = parse(j.get<std::string>()); }

SCHEMALOOP_ENUM_JSON(Stage, stage_from_string)
SCHEMALOOP_ENUM_JSON(Provenance, provenance_from_string)
SCHEMALOOP_ENUM_JSON(Actor, actor_from_string)
SCHEMALOOP_ENUM_JSON(EdgeKind, edge_kind_from_string)
SCHEMALOOP_ENUM_JSON(GroundingMethod, grounding_method_from_string)
SCHEMALOOP_ENUM_JSON(Action, action_from_string)

#undef SCHEMALOOP_ENUM_JSON

void to_json(json& j, const Step& v) {
  j = json{{"step_id", v.step_id},
           {"text", v.text},
           {"selected", v.selected},
           {"provenance", v.provenance},
           {"parent_step_id", opt(v.parent_step_id)}};
}

void from_json(const json& j, Step& v) {
  v.step_id = j.at("step_id").get<std::string>();
  v.text = j.at("text").get<std::string>();
  v.selected = j.at("selected").get<bool>();
  v.provenance = j.at("provenance").get<Provenance>();
  v.parent_step_id = opt_str(j, "parent_step_id");
}

void to_json(json& j, const EventNode& v) {
  j = json{{"node_id", v.node_id},
           {"subject", v.subject},
           {"verb", v.verb},
           {"object", opt(v.object)},
           {"label", v.label},
           {"provenance", v.provenance},
           {"source_step_id", opt(v.source_step_id)},
           {"selected", v.selected},
           {"orphaned", v.orphaned}};
}

void from_json(const json& j, EventNode& v) {
  v.node_id = j.at("node_id").get<std::string>();
  v.subject = j.at("subject").get<std::string>();
  v.verb = j.at("verb").get<std::string>();
  v.object = opt_str(j, "object");
  v.label = j.at("label").get<std::string>();
  v.provenance = j.at("provenance").get<Provenance>();
  v.source_step_id = opt_str(j, "source_step_id");
  v.selected = j.at("selected").get<bool>();
  v.orphaned = j.at("orphaned").get<bool>();
}

void to_json(json& j, const GraphNode& v) {
  j = json{{"node_id", v.node_id}, {"label", opt(v.label)}, {"provenance", v.provenance}};
}

void from_json(const json& j, GraphNode& v) {
  v.node_id = j.at("node_id").get<std::string>();
  v.label = opt_str(j, "label");
  v.provenance = j.at("provenance").get<Actor>();
}

void to_json(json& j, const Edge& v) {
  j = json{{"source", v.source}, {"target", v.target}, {"kind", v.kind}, {"provenance", v.provenance}};
}

void from_json(const json& j, Edge& v) {
  v.source = j.at("source").get<std::string>();
  v.target = j.at("target").get<std::string>();
  v.kind = j.at("kind").get<EdgeKind>();
  v.provenance = j.at("provenance").get<Actor>();
}

void to_json(json& j, const SchemaGraph& v) {
  json same = json::array();
  for (const auto& [a, b] : v.same_time) same.push_back(json::array({a, b}));
  j = json{{"nodes", v.nodes}, {"edges", v.edges}, {"same_time", same}};
}

void from_json(const json& j, SchemaGraph& v) {
  v.nodes = j.at("nodes").get<std::vector<GraphNode>>();
  v.edges = j.at("edges").get<std::vector<Edge>>();
  v.same_time.clear();
  for (const auto& p : j.at("same_time"))
    v.same_time.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
}

void to_json(json& j, const CandidateRecord& v) {
  j = json{{"xpo_id", v.xpo_id}, {"name", v.name}, {"score", v.score}, {"rank", v.rank}};
}

void from_json(const json& j, CandidateRecord& v) {
  v.xpo_id = j.at("xpo_id").get<std::string>();
  v.name = j.at("name").get<std::string>();
  v.score = j.at("score").get<double>();
  v.rank = j.at("rank").get<int>();
}

void to_json(json& j, const GroundingQuery& v) {
  j = json{{"method", v.method}, {"k", v.k}, {"candidates", v.candidates}, {"warnings", v.warnings}};
}

void from_json(const json& j, GroundingQuery& v) {
  v.method = j.at("method").get<GroundingMethod>();
  v.k = j.at("k").get<int>();
  v.candidates = j.at("candidates").get<std::vector<CandidateRecord>>();
  v.warnings = j.at("warnings").get<std::vector<std::string>>();
}

void to_json(json& j, const NodeGrounding& v) {
  json queries = json::object();
  for (const auto& [m, q] : v.queries) queries[to_string(m)] = q;
  j = json{{"queries", queries}, {"chosen_xpo_id", opt(v.chosen_xpo_id)}, {"relevant", v.relevant}};
}

void from_json(const json& j, NodeGrounding& v) {
  v.queries.clear();
  for (const auto& [m, q] : j.at("queries").items())
    v.queries[grounding_method_from_string(m)] = q.get<GroundingQuery>();
  v.chosen_xpo_id = opt_str(j, "chosen_xpo_id");
  v.relevant = j.at("relevant").get<std::vector<std::string>>();
}

void to_json(json& j, const CurationEvent& v) {
  j = json{{"event_id", v.event_id},
           {"actor", v.actor},
           {"action", v.action},
           {"payload", v.payload},
           {"timestamp", v.timestamp}};
}

void from_json(const json& j, CurationEvent& v) {
  v.event_id = j.at("event_id").get<std::string>();
  v.actor = j.at("actor").get<Actor>();
  v.action = j.at("action").get<Action>();
  v.payload = j.at("payload");
  v.timestamp = j.at("timestamp").get<std::int64_t>();
}

void to_json(json& j, const SchemaSession& v) {
  j = json{{"session_id", v.session_id},
           {"scenario", v.scenario},
           {"stage_cursor", v.stage_cursor},
           {"steps", v.steps},
           {"nodes", v.nodes},
           {"graph", v.graph},
           {"model_graph", v.model_graph ? json(*v.model_graph) : json(nullptr)},
           {"groundings", v.groundings},
           {"curation_log", v.curation_log},
           {"created_at", v.created_at},
           {"updated_at", v.updated_at},
           {"generated_steps", v.generated_steps},
           {"generated_nodes", v.generated_nodes},
           {"id_counters", v.id_counters}};
}

void from_json(const json& j, SchemaSession& v) {
  v.session_id = j.at("session_id").get<std::string>();
  v.scenario = j.at("scenario").get<std::string>();
  v.stage_cursor = j.at("stage_cursor").get<Stage>();
  v.steps = j.at("steps").get<std::vector<Step>>();
  v.nodes = j.at("nodes").get<std::vector<EventNode>>();
  v.graph = j.at("graph").get<SchemaGraph>();
  if (j.at("model_graph").is_null())
    v.model_graph.reset();
  else
    v.model_graph = j.at("model_graph").get<SchemaGraph>();
  v.groundings = j.at("groundings").get<std::map<std::string, NodeGrounding>>();
  v.curation_log = j.at("curation_log").get<std::vector<CurationEvent>>();
  v.created_at = j.at("created_at").get<std::int64_t>();
  v.updated_at = j.at("updated_at").get<std::int64_t>();
  v.generated_steps = j.at("generated_steps").get<std::int64_t>();
  v.generated_nodes = j.at("generated_nodes").get<std::int64_t>();
  v.id_counters = j.at("id_counters").get<std::map<std::string, std::uint64_t>>();
}

}  // namespace schemaloop::core
