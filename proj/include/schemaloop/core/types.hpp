#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace schemaloop::core {

enum class Stage { StepGeneration, NodeExtraction, GraphConstruction, NodeGrounding };

enum class Provenance { Model, HumanEdited, HumanAdded };

enum class Actor { Model, Human };

enum class EdgeKind { Temporal, Hierarchical };

enum class GroundingMethod { Similarity, Inference };

enum class Action {
  CreateSession,
  GenerateSteps,
  SelectStep,
  EditStep,
  AddStep,
  DeleteStep,
  ExtractNodes,
  SelectNode,
  EditNode,
  AddNode,
  DeleteNode,
  BuildGraph,
  AddEdge,
  DeleteEdge,
  EditEdge,
  AddGraphNode,
  DeleteGraphNode,
  GroundQuery,
  ChooseGrounding,
};

std::string to_string(Stage v);
std::string to_string(Provenance v);
std::string to_string(Actor v);
std::string to_string(EdgeKind v);
std::string to_string(GroundingMethod v);
std::string to_string(Action v);

Stage stage_from_string(const std::string& s);
Provenance provenance_from_string(const std::string& s);
Actor actor_from_string(const std::string& s);
EdgeKind edge_kind_from_string(const std::string& s);
GroundingMethod grounding_method_from_string(const std::string& s);
Action action_from_string(const std::string& s);

// Stage an action belongs to; applying it moves the session's stage cursor there.
Stage stage_of(Action action);

struct Step {
  std::string step_id;
  std::string text;
  bool selected = true;
  Provenance provenance = Provenance::Model;
  std::optional<std::string> parent_step_id;

  bool operator==(const Step&) const = default;
};

struct EventNode {
  std::string node_id;
  std::string subject;
  std::string verb;
  std::optional<std::string> object;
  std::string label;
  Provenance provenance = Provenance::Model;
  std::optional<std::string> source_step_id;
  bool selected = true;
  // Set when the source step was deleted; the node stays for curator review.
  bool orphaned = false;

  bool operator==(const EventNode&) const = default;
};

// "subject verb object" with whitespace collapsed; an absent object is omitted.
std::string node_label(const std::string& subject, const std::string& verb,
                       const std::optional<std::string>& object);
std::string node_label(const EventNode& node);

// A graph vertex: either a reference to an EventNode (no label) or a standalone
// curator-added node such as the scenario root (label required).
struct GraphNode {
  std::string node_id;
  std::optional<std::string> label;
  Actor provenance = Actor::Model;

  bool operator==(const GraphNode&) const = default;
};

// Temporal s->t: s happens before t. Hierarchical s->t: s is the parent of t.
struct Edge {
  std::string source;
  std::string target;
  EdgeKind kind = EdgeKind::Temporal;
  Actor provenance = Actor::Model;

  bool same_identity(const Edge& o) const {
    return source == o.source && target == o.target && kind == o.kind;
  }
  bool operator==(const Edge&) const = default;
};

struct SchemaGraph {
  std::vector<GraphNode> nodes;
  std::vector<Edge> edges;
  // Unordered pairs the model judged simultaneous; kept as node metadata, not edges.
  std::vector<std::pair<std::string, std::string>> same_time;

  bool has_node(const std::string& id) const;
  const GraphNode* find_node(const std::string& id) const;
  bool has_edge(const std::string& source, const std::string& target, EdgeKind kind) const;
  bool empty() const { return nodes.empty(); }

  bool operator==(const SchemaGraph&) const = default;
};

struct CandidateRecord {
  std::string xpo_id;
  std::string name;
  double score = 0.0;
  int rank = 1;

  bool operator==(const CandidateRecord&) const = default;
};

struct GroundingQuery {
  GroundingMethod method = GroundingMethod::Similarity;
  int k = 3;
  std::vector<CandidateRecord> candidates;
  std::vector<std::string> warnings;

  bool operator==(const GroundingQuery&) const = default;
};

struct NodeGrounding {
  // Latest query per method.
  std::map<GroundingMethod, GroundingQuery> queries;
  std::optional<std::string> chosen_xpo_id;
  // Candidates the curator marked relevant; the chosen one is always included.
  std::vector<std::string> relevant;

  bool operator==(const NodeGrounding&) const = default;
};

struct CurationEvent {
  std::string event_id;
  Actor actor = Actor::Human;
  Action action = Action::CreateSession;
  nlohmann::json payload = nlohmann::json::object();
  std::int64_t timestamp = 0;  // ms since epoch

  bool operator==(const CurationEvent&) const = default;
};

struct SchemaSession {
  std::string session_id;
  std::string scenario;
  Stage stage_cursor = Stage::StepGeneration;
  std::vector<Step> steps;
  std::vector<EventNode> nodes;
  SchemaGraph graph;
  // Graph as last produced by build-graph; baseline for graph edit distance.
  std::optional<SchemaGraph> model_graph;
  std::map<std::string, NodeGrounding> groundings;
  std::vector<CurationEvent> curation_log;
  std::int64_t created_at = 0;
  std::int64_t updated_at = 0;
  // Running totals of machine-generated entities (deletions do not decrement).
  std::int64_t generated_steps = 0;
  std::int64_t generated_nodes = 0;
  std::map<std::string, std::uint64_t> id_counters;

  const Step* find_step(const std::string& id) const;
  const EventNode* find_node(const std::string& id) const;
  Step* find_step(const std::string& id);
  EventNode* find_node(const std::string& id);
  // Label shown for a graph node: the event label or the standalone label.
  std::optional<std::string> graph_label(const std::string& graph_node_id) const;

  bool operator==(const SchemaSession&) const = default;
};

}  // namespace schemaloop::core
