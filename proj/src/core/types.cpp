#include "schemaloop/core/types.hpp"

#include <algorithm>
#include <array>

#include "schemaloop/error.hpp"
#include "schemaloop/util/text.hpp"

namespace schemaloop::core {

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::array<std::pair<E, const char*>, N>& table, const std::string& s,
             const char* what) {
  for (const auto& [v, name] : table)
    if (s == name) return v;
  throw MalformedPayload(std::string("unknown ") + what + " '" + s + "'");
}

template <typename E, std::size_t N>
std::string name_of(const std::array<std::pair<E, const char*>, N>& table, E v) {
  for (const auto& [e, name] : table)
    if (e == v) return name;
  return "unknown";
}

constexpr std::array<std::pair<Stage, const char*>, 4> kStages{{
    {Stage::StepGeneration, "step-generation"},
    {Stage::NodeExtraction, "node-extraction"},
    {Stage::GraphConstruction, "graph-construction"},
    {Stage::NodeGrounding, "grounding"},
}};

constexpr std::array<std::pair<Provenance, const char*>, 3> kProvenances{{
    {Provenance::Model, "model"},
    {Provenance::HumanEdited, "human-edited"},
    {Provenance::HumanAdded, "human-added"},
}};

constexpr std::array<std::pair<Actor, const char*>, 2> kActors{{
    {Actor::Model, "model"},
    {Actor::Human, "human"},
}};

constexpr std::array<std::pair<EdgeKind, const char*>, 2> kEdgeKinds{{
    {EdgeKind::Temporal, "temporal"},
    {EdgeKind::Hierarchical, "hierarchical"},
}};

constexpr std::array<std::pair<GroundingMethod, const char*>, 2> kMethods{{
    {GroundingMethod::Similarity, "similarity"},
    {GroundingMethod::Inference, "inference"},
}};

constexpr std::array<std::pair<Action, const char*>, 19> kActions{{
    {Action::CreateSession, "create-session"},
    {Action::GenerateSteps, "generate-steps"},
    {Action::SelectStep, "select-step"},
    {Action::EditStep, "edit-step"},
    {Action::AddStep, "add-step"},
    {Action::DeleteStep, "delete-step"},
    {Action::ExtractNodes, "extract-nodes"},
    {Action::SelectNode, "select-node"},
    {Action::EditNode, "edit-node"},
    {Action::AddNode, "add-node"},
    {Action::DeleteNode, "delete-node"},
    {Action::BuildGraph, "build-graph"},
    {Action::AddEdge, "add-edge"},
    {Action::DeleteEdge, "delete-edge"},
    {Action::EditEdge, "edit-edge"},
    {Action::AddGraphNode, "add-graph-node"},
    {Action::DeleteGraphNode, "delete-graph-node"},
    {Action::GroundQuery, "ground-query"},
    {Action::ChooseGrounding, "choose-grounding"},
}};

}  // namespace

std::string to_string(Stage v) { return name_of(kStages, v); }
std::string to_string(Provenance v) { return name_of(kProvenances, v); }
std::string to_string(Actor v) { return name_of(kActors, v); }
std::string to_string(EdgeKind v) { return name_of(kEdgeKinds, v); }
std::string to_string(GroundingMethod v) { return name_of(kMethods, v); }
std::string to_string(Action v) { return name_of(kActions, v); }

Stage stage_from_string(const std::string& s) { return parse_enum(kStages, s, "stage"); }
Provenance provenance_from_string(const std::string& s) {
  return parse_enum(kProvenances, s, "provenance");
}
Actor actor_from_string(const std::string& s) { return parse_enum(kActors, s, "actor"); }
EdgeKind edge_kind_from_string(const std::string& s) { return parse_enum(kEdgeKinds, s, "edge kind"); }
GroundingMethod grounding_method_from_string(const std::string& s) {
  return parse_enum(kMethods, s, "grounding method");
}
Action action_from_string(const std::string& s) { return parse_enum(kActions, s, "action"); }

Stage stage_of(Action action) {
  switch (action) {
    case Action::CreateSession:
    case Action::GenerateSteps:
    case Action::SelectStep:
    case Action::EditStep:
    case Action::AddStep:
    case Action::DeleteStep:
      return Stage::StepGeneration;
    case Action::ExtractNodes:
    case Action::SelectNode:
    case Action::EditNode:
    case Action::AddNode:
    case Action::DeleteNode:
      return Stage::NodeExtraction;
    case Action::BuildGraph:
    case Action::AddEdge:
    case Action::DeleteEdge:
    case Action::EditEdge:
    case Action::AddGraphNode:
    case Action::DeleteGraphNode:
      return Stage::GraphConstruction;
    case Action::GroundQuery:
    case Action::ChooseGrounding:
      return Stage::NodeGrounding;
  }
  return Stage::StepGeneration;
}

std::string node_label(const std::string& subject, const std::string& verb,
                       const std::optional<std::string>& object) {
  std::string raw = subject + " " + verb;
  if (object) raw += " " + *object;
  return text::collapse_whitespace(raw);
}

std::string node_label(const EventNode& node) { return node_label(node.subject, node.verb, node.object); }

bool SchemaGraph::has_node(const std::string& id) const { return find_node(id) != nullptr; }

const GraphNode* SchemaGraph::find_node(const std::string& id) const {
  auto it = std::find_if(nodes.begin(), nodes.end(), [&](const auto& n) { return n.node_id == id; });
  return it == nodes.end() ? nullptr : &*it;
}

bool SchemaGraph::has_edge(const std::string& source, const std::string& target, EdgeKind kind) const {
  return std::any_of(edges.begin(), edges.end(), [&](const auto& e) {
    return e.source == source && e.target == target && e.kind == kind;
  });
}

const Step* SchemaSession::find_step(const std::string& id) const {
  auto it = std::find_if(steps.begin(), steps.end(), [&](const auto& s) { return s.step_id == id; });
  return it == steps.end() ? nullptr : &*it;
}

const EventNode* SchemaSession::find_node(const std::string& id) const {
  auto it = std::find_if(nodes.begin(), nodes.end(), [&](const auto& n) { return n.node_id == id; });
  return it == nodes.end() ? nullptr : &*it;
}

Step* SchemaSession::find_step(const std::string& id) {
  return const_cast<Step*>(std::as_const(*this).find_step(id));
}

EventNode* SchemaSession::find_node(const std::string& id) {
  return const_cast<EventNode*>(std::as_const(*this).find_node(id));
}

std::optional<std::string> SchemaSession::graph_label(const std::string& graph_node_id) const {
  if (const auto* g = graph.find_node(graph_node_id); g && g->label) return g->label;
  if (const auto* n = find_node(graph_node_id)) return n->label;
  return std::nullopt;
}

}  // namespace schemaloop::core
