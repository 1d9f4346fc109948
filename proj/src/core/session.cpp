#include "schemaloop/core/session.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "schemaloop/core/serialize.hpp"
#include "schemaloop/error.hpp"
#include "schemaloop/util/text.hpp"

namespace schemaloop::core {

using nlohmann::json;

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string new_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

CurationEvent make_event(Actor actor, Action action, json payload) {
  return CurationEvent{"", actor, action, std::move(payload), now_ms()};
}

// ---------------------------------------------------------------------------
// Payload schemas

namespace {

enum class T { String, Bool, Int, Number, Array, Object, StringOrNull };

struct Field {
  const char* name;
  T type;
  bool required;
  const std::vector<Field>* items = nullptr;  // schema of array elements (objects)
};

bool type_ok(const json& v, T t) {
  switch (t) {
    case T::String: return v.is_string();
    case T::Bool: return v.is_boolean();
    case T::Int: return v.is_number_integer();
    case T::Number: return v.is_number();
    case T::Array: return v.is_array();
    case T::Object: return v.is_object();
    case T::StringOrNull: return v.is_string() || v.is_null();
  }
  return false;
}

void check_fields(const json& obj, const std::vector<Field>& schema, const std::string& where) {
  if (!obj.is_object()) throw MalformedPayload(where + " must be an object");
  for (const auto& f : schema) {
    if (!obj.contains(f.name)) {
      if (f.required) throw MalformedPayload(where + " is missing field '" + f.name + "'");
      continue;
    }
    const auto& v = obj.at(f.name);
    if (!type_ok(v, f.type)) throw MalformedPayload(where + " field '" + f.name + "' has the wrong type");
    if (f.items) {
      for (std::size_t i = 0; i < v.size(); ++i)
        check_fields(v[i], *f.items, where + "." + f.name + "[" + std::to_string(i) + "]");
    }
  }
}

const std::vector<Field> kStepItem{{"step_id", T::String, false},
                                   {"text", T::String, true},
                                   {"parent_step_id", T::StringOrNull, false},
                                   {"selected", T::Bool, false}};
const std::vector<Field> kNodeItem{{"node_id", T::String, false},
                                   {"subject", T::String, true},
                                   {"verb", T::String, true},
                                   {"object", T::StringOrNull, false},
                                   {"source_step_id", T::StringOrNull, false}};
const std::vector<Field> kEdgeItem{{"source", T::String, true},
                                   {"target", T::String, true},
                                   {"kind", T::String, true}};
const std::vector<Field> kCandidateItem{{"xpo_id", T::String, true},
                                        {"name", T::String, true},
                                        {"score", T::Number, true},
                                        {"rank", T::Int, true}};

const std::vector<Field>& schema_for(Action action) {
  static const std::map<Action, std::vector<Field>> schemas{
      {Action::CreateSession, {{"session_id", T::String, true}, {"scenario", T::String, true}}},
      {Action::GenerateSteps,
       {{"template_id", T::String, false},
        {"prompt", T::String, false},
        {"steps", T::Array, true, &kStepItem}}},
      {Action::SelectStep, {{"step_id", T::String, true}, {"selected", T::Bool, false}}},
      {Action::EditStep, {{"step_id", T::String, true}, {"text", T::String, true}}},
      {Action::AddStep,
       {{"step_id", T::String, false},
        {"text", T::String, true},
        {"parent_step_id", T::StringOrNull, false},
        {"selected", T::Bool, false}}},
      {Action::DeleteStep, {{"step_id", T::String, true}}},
      {Action::ExtractNodes,
       {{"method", T::String, false},
        {"source_step_id", T::StringOrNull, false},
        {"nodes", T::Array, true, &kNodeItem},
        {"skipped", T::Array, false}}},
      {Action::SelectNode, {{"node_id", T::String, true}, {"selected", T::Bool, false}}},
      {Action::EditNode,
       {{"node_id", T::String, true},
        {"subject", T::String, false},
        {"verb", T::String, false},
        {"object", T::StringOrNull, false}}},
      {Action::AddNode,
       {{"node_id", T::String, false},
        {"subject", T::String, true},
        {"verb", T::String, true},
        {"object", T::StringOrNull, false},
        {"source_step_id", T::StringOrNull, false}}},
      {Action::DeleteNode, {{"node_id", T::String, true}}},
      {Action::BuildGraph,
       {{"node_ids", T::Array, true}, {"edges", T::Array, true, &kEdgeItem}, {"same_time", T::Array, false}}},
      {Action::AddEdge, kEdgeItem},
      {Action::DeleteEdge, kEdgeItem},
      {Action::EditEdge,
       {{"source", T::String, true},
        {"target", T::String, true},
        {"kind", T::String, true},
        {"new_source", T::String, false},
        {"new_target", T::String, false},
        {"new_kind", T::String, false}}},
      {Action::AddGraphNode, {{"node_id", T::String, false}, {"label", T::String, false}}},
      {Action::DeleteGraphNode, {{"node_id", T::String, true}}},
      {Action::GroundQuery,
       {{"node_id", T::String, true},
        {"method", T::String, true},
        {"k", T::Int, true},
        {"candidates", T::Array, true, &kCandidateItem},
        {"warnings", T::Array, false}}},
      {Action::ChooseGrounding,
       {{"node_id", T::String, true}, {"xpo_id", T::StringOrNull, true}, {"relevant", T::Array, false}}},
  };
  return schemas.at(action);
}

void check_string_array(const json& payload, const char* key) {
  if (!payload.contains(key)) return;
  for (const auto& v : payload.at(key))
    if (!v.is_string()) throw MalformedPayload(std::string("'") + key + "' must contain strings");
}

}  // namespace

void validate_payload(Action action, const json& payload) {
  check_fields(payload, schema_for(action), to_string(action) + " payload");
  check_string_array(payload, "node_ids");
  check_string_array(payload, "relevant");
  check_string_array(payload, "warnings");
  if (payload.contains("kind")) (void)edge_kind_from_string(payload.at("kind").get<std::string>());
  if (payload.contains("new_kind")) (void)edge_kind_from_string(payload.at("new_kind").get<std::string>());
  if (payload.contains("edges"))
    for (const auto& e : payload.at("edges")) (void)edge_kind_from_string(e.at("kind").get<std::string>());
  if (action == Action::GroundQuery) {
    (void)grounding_method_from_string(payload.at("method").get<std::string>());
    if (payload.at("k").get<int>() < 1) throw MalformedPayload("k must be >= 1");
  }
  if (payload.contains("same_time")) {
    for (const auto& p : payload.at("same_time"))
      if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
        throw MalformedPayload("same_time entries must be [id, id] pairs");
  }
}

// ---------------------------------------------------------------------------
// Handlers

namespace {

std::string require_text(const json& payload, const char* key) {
  auto v = text::trim(payload.at(key).get<std::string>());
  if (v.empty()) throw MalformedPayload(std::string("'") + key + "' must be non-empty");
  return v;
}

std::optional<std::string> opt_field(const json& payload, const char* key) {
  if (!payload.contains(key) || payload.at(key).is_null()) return std::nullopt;
  return payload.at(key).get<std::string>();
}

std::string allocate_id(SchemaSession& s, const std::string& prefix,
                        const std::function<bool(const std::string&)>& taken) {
  auto& counter = s.id_counters[prefix];
  std::string id;
  do {
    id = prefix + "-" + std::to_string(++counter);
  } while (taken(id));
  return id;
}

// Keeps the counter ahead of ids that arrive in payloads, so replaying a log whose
// ids were written back lands on the same counters as the live session.
void note_explicit_id(SchemaSession& s, const std::string& prefix, const std::string& id) {
  const std::string head = prefix + "-";
  if (id.size() <= head.size() || id.compare(0, head.size(), head) != 0) return;
  std::uint64_t n = 0;
  for (std::size_t i = head.size(); i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9' || n > (UINT64_MAX - 9) / 10) return;
    n = n * 10 + static_cast<std::uint64_t>(id[i] - '0');
  }
  auto& counter = s.id_counters[prefix];
  counter = std::max(counter, n);
}

bool step_taken(const SchemaSession& s, const std::string& id) { return s.find_step(id) != nullptr; }
bool node_taken(const SchemaSession& s, const std::string& id) {
  return s.find_node(id) != nullptr || s.graph.has_node(id);
}

// Uses the payload's id when present (rejecting collisions), otherwise allocates one
// and writes it back so the log records it.
std::string claim_id(SchemaSession& s, json& item, const char* key, const std::string& prefix,
                     bool (*taken)(const SchemaSession&, const std::string&)) {
  if (item.contains(key) && item.at(key).is_string()) {
    auto id = item.at(key).get<std::string>();
    if (id.empty()) throw MalformedPayload(std::string("'") + key + "' must be non-empty");
    if (taken(s, id)) throw MalformedPayload("id '" + id + "' already exists");
    note_explicit_id(s, prefix, id);
    return id;
  }
  auto id = allocate_id(s, prefix, [&](const std::string& c) { return taken(s, c); });
  item[key] = id;
  return id;
}

Step& step_or_throw(SchemaSession& s, const std::string& id) {
  auto* st = s.find_step(id);
  if (!st) throw UnknownEntity("unknown step '" + id + "'");
  return *st;
}

EventNode& node_or_throw(SchemaSession& s, const std::string& id) {
  auto* n = s.find_node(id);
  if (!n) throw UnknownEntity("unknown node '" + id + "'");
  return *n;
}

void drop_graph_node(SchemaSession& s, const std::string& id, json& changed) {
  auto& g = s.graph;
  auto it = std::find_if(g.nodes.begin(), g.nodes.end(), [&](const auto& n) { return n.node_id == id; });
  if (it == g.nodes.end()) return;
  bool standalone = it->label.has_value();
  g.nodes.erase(it);
  for (const auto& e : g.edges)
    if (e.source == id || e.target == id) changed["edges_removed"].push_back(e);
  std::erase_if(g.edges, [&](const Edge& e) { return e.source == id || e.target == id; });
  std::erase_if(g.same_time, [&](const auto& p) { return p.first == id || p.second == id; });
  changed["graph_nodes_removed"].push_back(id);
  if (standalone) s.groundings.erase(id);
}

Edge edge_from(const json& p, Actor provenance) {
  return Edge{p.at("source").get<std::string>(), p.at("target").get<std::string>(),
              edge_kind_from_string(p.at("kind").get<std::string>()), provenance};
}

void check_new_edge(const SchemaGraph& g, const Edge& e) {
  if (!g.has_node(e.source)) throw UnknownEntity("unknown graph node '" + e.source + "'");
  if (!g.has_node(e.target)) throw UnknownEntity("unknown graph node '" + e.target + "'");
  if (e.source == e.target) throw MalformedPayload("self-loop edges are not allowed");
  if (g.has_edge(e.source, e.target, e.kind))
    throw MalformedPayload("edge " + e.source + " -> " + e.target + " (" + to_string(e.kind) +
                           ") already exists");
}

json apply_to(SchemaSession& s, CurationEvent& ev) {
  json& p = ev.payload;
  json changed = json::object();
  switch (ev.action) {
    case Action::CreateSession: {
      if (!s.curation_log.empty()) throw MalformedPayload("session already created");
      auto scenario = text::trim(p.at("scenario").get<std::string>());
      if (scenario.empty()) throw EmptyScenario("scenario must be non-empty");
      s.session_id = p.at("session_id").get<std::string>();
      if (s.session_id.empty()) throw MalformedPayload("session_id must be non-empty");
      s.scenario = scenario;
      s.created_at = ev.timestamp;
      break;
    }
    case Action::GenerateSteps: {
      for (auto& item : p.at("steps")) {
        Step st;
        st.text = require_text(item, "text");
        st.parent_step_id = opt_field(item, "parent_step_id");
        if (st.parent_step_id) step_or_throw(s, *st.parent_step_id);
        st.selected = item.value("selected", true);
        st.provenance = Provenance::Model;
        st.step_id = claim_id(s, item, "step_id", "step", step_taken);
        s.steps.push_back(st);
        changed["steps"].push_back(st);
      }
      s.generated_steps += static_cast<std::int64_t>(p.at("steps").size());
      break;
    }
    case Action::SelectStep: {
      auto& st = step_or_throw(s, p.at("step_id").get<std::string>());
      st.selected = p.value("selected", true);
      changed["steps"].push_back(st);
      break;
    }
    case Action::EditStep: {
      auto& st = step_or_throw(s, p.at("step_id").get<std::string>());
      st.text = require_text(p, "text");
      if (st.provenance == Provenance::Model) st.provenance = Provenance::HumanEdited;
      changed["steps"].push_back(st);
      break;
    }
    case Action::AddStep: {
      Step st;
      st.text = require_text(p, "text");
      st.parent_step_id = opt_field(p, "parent_step_id");
      if (st.parent_step_id) step_or_throw(s, *st.parent_step_id);
      st.selected = p.value("selected", true);
      st.provenance = Provenance::HumanAdded;
      st.step_id = claim_id(s, p, "step_id", "step", step_taken);
      s.steps.push_back(st);
      changed["steps"].push_back(st);
      break;
    }
    case Action::DeleteStep: {
      auto id = p.at("step_id").get<std::string>();
      step_or_throw(s, id);
      std::erase_if(s.steps, [&](const Step& st) { return st.step_id == id; });
      for (auto& st : s.steps) {
        if (st.parent_step_id == id) {
          st.parent_step_id.reset();
          changed["steps"].push_back(st);
        }
      }
      for (auto& n : s.nodes) {
        if (n.source_step_id == id) {
          n.source_step_id.reset();
          n.orphaned = true;
          changed["nodes"].push_back(n);
        }
      }
      changed["steps_removed"].push_back(id);
      break;
    }
    case Action::ExtractNodes: {
      auto batch_source = opt_field(p, "source_step_id");
      if (batch_source) step_or_throw(s, *batch_source);
      for (auto& item : p.at("nodes")) {
        EventNode n;
        n.subject = require_text(item, "subject");
        n.verb = require_text(item, "verb");
        n.object = opt_field(item, "object");
        if (n.object && text::trim(*n.object).empty()) n.object.reset();
        n.source_step_id = item.contains("source_step_id") ? opt_field(item, "source_step_id") : batch_source;
        if (n.source_step_id) step_or_throw(s, *n.source_step_id);
        n.label = node_label(n);
        n.provenance = Provenance::Model;
        n.node_id = claim_id(s, item, "node_id", "node", node_taken);
        s.nodes.push_back(n);
        changed["nodes"].push_back(n);
      }
      s.generated_nodes += static_cast<std::int64_t>(p.at("nodes").size());
      break;
    }
    case Action::SelectNode: {
      auto& n = node_or_throw(s, p.at("node_id").get<std::string>());
      n.selected = p.value("selected", true);
      changed["nodes"].push_back(n);
      break;
    }
    case Action::EditNode: {
      auto& n = node_or_throw(s, p.at("node_id").get<std::string>());
      EventNode edited = n;
      if (p.contains("subject")) edited.subject = require_text(p, "subject");
      if (p.contains("verb")) edited.verb = require_text(p, "verb");
      if (p.contains("object")) {
        edited.object = opt_field(p, "object");
        if (edited.object && text::trim(*edited.object).empty()) edited.object.reset();
      }
      edited.label = node_label(edited);
      if (edited.provenance == Provenance::Model) edited.provenance = Provenance::HumanEdited;
      n = edited;
      changed["nodes"].push_back(n);
      break;
    }
    case Action::AddNode: {
      EventNode n;
      n.subject = require_text(p, "subject");
      n.verb = require_text(p, "verb");
      n.object = opt_field(p, "object");
      if (n.object && text::trim(*n.object).empty()) n.object.reset();
      n.source_step_id = opt_field(p, "source_step_id");
      if (n.source_step_id) step_or_throw(s, *n.source_step_id);
      n.label = node_label(n);
      n.provenance = Provenance::HumanAdded;
      n.node_id = claim_id(s, p, "node_id", "node", node_taken);
      s.nodes.push_back(n);
      changed["nodes"].push_back(n);
      break;
    }
    case Action::DeleteNode: {
      auto id = p.at("node_id").get<std::string>();
      node_or_throw(s, id);
      std::erase_if(s.nodes, [&](const EventNode& n) { return n.node_id == id; });
      drop_graph_node(s, id, changed);
      s.groundings.erase(id);
      changed["nodes_removed"].push_back(id);
      break;
    }
    case Action::BuildGraph: {
      SchemaGraph g;
      for (const auto& idv : p.at("node_ids")) {
        auto id = idv.get<std::string>();
        node_or_throw(s, id);
        if (g.has_node(id)) throw MalformedPayload("duplicate node '" + id + "' in build-graph");
        g.nodes.push_back(GraphNode{id, std::nullopt, Actor::Model});
      }
      for (const auto& e : p.at("edges")) {
        auto edge = edge_from(e, Actor::Model);
        check_new_edge(g, edge);
        g.edges.push_back(edge);
      }
      if (p.contains("same_time")) {
        for (const auto& pair : p.at("same_time")) {
          auto a = pair[0].get<std::string>();
          auto b = pair[1].get<std::string>();
          if (!g.has_node(a) || !g.has_node(b)) throw UnknownEntity("same_time pair references unknown node");
          g.same_time.emplace_back(a, b);
        }
      }
      s.graph = g;
      s.model_graph = g;
      changed["graph"] = g;
      break;
    }
    case Action::AddEdge: {
      auto edge = edge_from(p, ev.actor);
      check_new_edge(s.graph, edge);
      s.graph.edges.push_back(edge);
      changed["edges_added"].push_back(edge);
      break;
    }
    case Action::DeleteEdge: {
      auto edge = edge_from(p, ev.actor);
      auto it = std::find_if(s.graph.edges.begin(), s.graph.edges.end(),
                             [&](const Edge& e) { return e.same_identity(edge); });
      if (it == s.graph.edges.end())
        throw UnknownEntity("unknown edge " + edge.source + " -> " + edge.target);
      changed["edges_removed"].push_back(*it);
      s.graph.edges.erase(it);
      break;
    }
    case Action::EditEdge: {
      auto old_edge = edge_from(p, ev.actor);
      auto it = std::find_if(s.graph.edges.begin(), s.graph.edges.end(),
                             [&](const Edge& e) { return e.same_identity(old_edge); });
      if (it == s.graph.edges.end())
        throw UnknownEntity("unknown edge " + old_edge.source + " -> " + old_edge.target);
      Edge replacement{p.value("new_source", old_edge.source), p.value("new_target", old_edge.target),
                       p.contains("new_kind") ? edge_kind_from_string(p.at("new_kind").get<std::string>())
                                              : old_edge.kind,
                       ev.actor};
      if (replacement.same_identity(old_edge)) throw MalformedPayload("edit-edge changes nothing");
      Edge removed = *it;
      SchemaGraph probe = s.graph;
      probe.edges.erase(probe.edges.begin() + (it - s.graph.edges.begin()));
      check_new_edge(probe, replacement);
      probe.edges.push_back(replacement);
      s.graph = std::move(probe);
      changed["edges_removed"].push_back(removed);
      changed["edges_added"].push_back(replacement);
      break;
    }
    case Action::AddGraphNode: {
      auto label = opt_field(p, "label");
      if (label) {
        *label = text::trim(*label);
        if (label->empty()) throw MalformedPayload("'label' must be non-empty");
      }
      GraphNode gn;
      gn.provenance = ev.actor;
      if (p.contains("node_id") && s.find_node(p.at("node_id").get<std::string>())) {
        gn.node_id = p.at("node_id").get<std::string>();
        if (s.graph.has_node(gn.node_id)) throw MalformedPayload("node '" + gn.node_id + "' already in graph");
        if (label) throw MalformedPayload("event nodes take their label from the tuple");
      } else {
        if (!label) throw MalformedPayload("standalone graph nodes need a label");
        gn.label = label;
        gn.node_id = claim_id(s, p, "node_id", "gnode", node_taken);
      }
      s.graph.nodes.push_back(gn);
      changed["graph_nodes"].push_back(gn);
      break;
    }
    case Action::DeleteGraphNode: {
      auto id = p.at("node_id").get<std::string>();
      if (!s.graph.has_node(id)) throw UnknownEntity("unknown graph node '" + id + "'");
      drop_graph_node(s, id, changed);
      break;
    }
    case Action::GroundQuery: {
      auto id = p.at("node_id").get<std::string>();
      if (!s.find_node(id) && !s.graph.has_node(id)) throw UnknownEntity("unknown node '" + id + "'");
      GroundingQuery q;
      q.method = grounding_method_from_string(p.at("method").get<std::string>());
      q.k = p.at("k").get<int>();
      q.candidates = p.at("candidates").get<std::vector<CandidateRecord>>();
      if (p.contains("warnings")) q.warnings = p.at("warnings").get<std::vector<std::string>>();
      auto& grounding = s.groundings[id];
      grounding.queries[q.method] = q;
      changed["groundings"][id] = grounding;
      break;
    }
    case Action::ChooseGrounding: {
      auto id = p.at("node_id").get<std::string>();
      if (!s.find_node(id) && !s.graph.has_node(id)) throw UnknownEntity("unknown node '" + id + "'");
      auto& grounding = s.groundings[id];
      grounding.chosen_xpo_id = opt_field(p, "xpo_id");
      grounding.relevant.clear();
      if (p.contains("relevant"))
        for (const auto& r : p.at("relevant")) grounding.relevant.push_back(r.get<std::string>());
      if (grounding.chosen_xpo_id &&
          std::find(grounding.relevant.begin(), grounding.relevant.end(), *grounding.chosen_xpo_id) ==
              grounding.relevant.end())
        grounding.relevant.insert(grounding.relevant.begin(), *grounding.chosen_xpo_id);
      changed["groundings"][id] = grounding;
      break;
    }
  }
  return changed;
}

}  // namespace

SchemaSession create_session(const std::string& scenario, std::optional<std::string> session_id,
                             std::int64_t timestamp) {
  if (text::trim(scenario).empty()) throw EmptyScenario("scenario must be non-empty");
  SchemaSession s;
  CurationEvent ev{"", Actor::Human, Action::CreateSession,
                   json{{"session_id", session_id.value_or(new_session_id())}, {"scenario", scenario}},
                   timestamp ? timestamp : now_ms()};
  apply_curation(s, std::move(ev));
  return s;
}

ApplyResult apply_curation(SchemaSession& session, CurationEvent event) {
  validate_payload(event.action, event.payload);
  if (event.action != Action::CreateSession && session.curation_log.empty())
    throw MalformedPayload("session has no create-session event");
  if (event.timestamp == 0) event.timestamp = now_ms();
  if (event.event_id.empty()) event.event_id = "ev-" + std::to_string(session.curation_log.size() + 1);

  // Work on a copy so a rejected event leaves the session as it was. The log is
  // moved rather than copied.
  auto log = std::move(session.curation_log);
  session.curation_log = {};
  SchemaSession work = session;
  work.curation_log = std::move(log);
  json changed;
  try {
    changed = apply_to(work, event);
  } catch (...) {
    session.curation_log = std::move(work.curation_log);
    throw;
  }
  work.stage_cursor = stage_of(event.action);
  work.updated_at = event.timestamp;
  work.curation_log.push_back(event);
  session = std::move(work);
  return ApplyResult{std::move(event), std::move(changed)};
}

SchemaSession replay(const std::vector<CurationEvent>& log) {
  if (log.empty()) throw MalformedPayload("an empty log has no session to replay");
  SchemaSession s;
  for (const auto& ev : log) apply_curation(s, ev);
  return s;
}

}  // namespace schemaloop::core
