#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaloop/core/types.hpp"

namespace schemaloop::core {

// Exact ratio; kept unreduced so "11/12" prints as recorded.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
  bool operator==(const Fraction&) const = default;
};

void to_json(nlohmann::json& j, const Fraction& f);

// selected / generated. Throws DivisionByZero when generated == 0 and
// InvalidArgument unless 0 <= selected <= generated.
Fraction selection_accuracy(std::int64_t generated_count, std::int64_t selected_count);

struct EditDistance {
  std::int64_t nodes = 0;
  std::int64_t edges = 0;
  bool operator==(const EditDistance&) const = default;
};

// Id-anchored symmetric difference: nodes by node_id, edges by (source, target, kind).
// An edited edge therefore counts as one deletion plus one addition.
EditDistance graph_edit_distance(const SchemaGraph& model_graph, const SchemaGraph& curated_graph);

struct GroundingRecord {
  std::string node_id;
  std::vector<std::string> candidates;  // xpo ids in rank order
  std::set<std::string> relevant;       // human relevance marks
};

// Share of records whose first k candidates contain a relevant entry.
// Throws EmptyRecordSet for no records and InvalidArgument for k < 1.
Fraction grounding_success_rate(const std::vector<GroundingRecord>& records, int k = 3);

struct EvalReport {
  std::optional<Fraction> step_accuracy;
  std::optional<Fraction> node_accuracy;
  std::optional<std::int64_t> graph_node_edit_distance;
  std::optional<std::int64_t> graph_edge_edit_distance;
  std::optional<Fraction> grounding_success_rate;
  std::optional<std::int64_t> elapsed_ms;
};

void to_json(nlohmann::json& j, const EvalReport& r);

// Metrics derived from a session's state and curation history. A metric with
// nothing to measure (no generations, no model graph, no grounding queries) is absent.
EvalReport evaluate(const SchemaSession& session, int grounding_k = 3);

// Table rendering used by the CLI ("Step Acc  11/12  0.9167", "n/a" when absent).
std::string format_report(const EvalReport& report);

}  // namespace schemaloop::core
