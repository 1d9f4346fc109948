#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "schemaloop/core/types.hpp"
#include "schemaloop/prompt/parsers.hpp"

namespace schemaloop::graph {

using prompt::Axis;
using prompt::Relation;
using prompt::RelationAnswer;

struct NodeRef {
  std::string id;
  std::string label;
};

// All C(n,2) index pairs (i < j) in insertion order. Throws TooFewNodes for n < 2.
std::vector<std::pair<std::size_t, std::size_t>> enumerate_pairs(std::size_t node_count);

// Answers for one unordered pair, asked in both orderings on both axes.
struct PairVerdict {
  std::string node_a;
  std::string node_b;
  RelationAnswer temporal_ab{Axis::Temporal, Relation::NoRelation};
  RelationAnswer temporal_ba{Axis::Temporal, Relation::NoRelation};
  RelationAnswer hierarchical_ab{Axis::Hierarchical, Relation::NoRelation};
  RelationAnswer hierarchical_ba{Axis::Hierarchical, Relation::NoRelation};
};

struct PairResolution {
  std::optional<core::Edge> temporal;
  std::optional<core::Edge> hierarchical;
  bool same_time = false;
  bool temporal_conflict = false;
  bool hierarchical_conflict = false;
};

// Agreeing directional answers give an edge; contradicting ones (After/After,
// Parent/Parent, ...) give none; a lone directional answer against NoRelation is
// adopted; SameTime in either ordering suppresses the temporal edge and is reported.
PairResolution resolve_pair(const PairVerdict& verdict);

// Asks one multiple-choice question: how does `first` relate to `second` on `axis`.
// May throw; the builder degrades a failed question to NoRelation.
using RelationAsker = std::function<RelationAnswer(const NodeRef& first, const NodeRef& second, Axis axis)>;

struct BuildOptions {
  std::size_t max_in_flight = 4;
  // Called after each answered question with (answered, total).
  std::function<void(std::size_t, std::size_t)> on_progress;
};

struct BuildResult {
  core::SchemaGraph graph;
  std::size_t questions_asked = 0;
  std::vector<std::string> warnings;  // failed questions, conflicts
};

// Asks all 4*C(n,2) questions (bounded concurrency), resolves every pair and
// commits edges in pair-enumeration order, independent of answer arrival order.
BuildResult build_graph(const std::vector<NodeRef>& nodes, const RelationAsker& asker,
                        const BuildOptions& options = {});

// Every elementary cycle of the temporal subgraph, each rotated to start at its
// earliest node (graph node order) and listed in discovery order.
std::vector<std::vector<std::string>> detect_temporal_cycles(const core::SchemaGraph& graph);

// Graph nodes with more than one hierarchical parent.
std::vector<std::string> multi_parent_nodes(const core::SchemaGraph& graph);

}  // namespace schemaloop::graph
