#include "schemaloop/core/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <sstream>
#include <tuple>

#include "schemaloop/error.hpp"

namespace schemaloop::core {

using nlohmann::json;

void to_json(json& j, const Fraction& f) { j = json{{"num", f.num}, {"den", f.den}}; }

Fraction selection_accuracy(std::int64_t generated_count, std::int64_t selected_count) {
  if (generated_count == 0) throw DivisionByZero("no generated items");
  if (generated_count < 0 || selected_count < 0 || selected_count > generated_count)
    throw InvalidArgument("require 0 <= selected <= generated");
  return Fraction{selected_count, generated_count};
}

EditDistance graph_edit_distance(const SchemaGraph& model_graph, const SchemaGraph& curated_graph) {
  std::set<std::string> model_nodes;
  std::set<std::string> curated_nodes;
  for (const auto& n : model_graph.nodes) model_nodes.insert(n.node_id);
  for (const auto& n : curated_graph.nodes) curated_nodes.insert(n.node_id);

  using Key = std::tuple<std::string, std::string, EdgeKind>;
  std::set<Key> model_edges;
  std::set<Key> curated_edges;
  for (const auto& e : model_graph.edges) model_edges.emplace(e.source, e.target, e.kind);
  for (const auto& e : curated_graph.edges) curated_edges.emplace(e.source, e.target, e.kind);

  std::vector<std::string> node_diff;
  std::set_symmetric_difference(model_nodes.begin(), model_nodes.end(), curated_nodes.begin(),
                                curated_nodes.end(), std::back_inserter(node_diff));
  std::vector<Key> edge_diff;
  std::set_symmetric_difference(model_edges.begin(), model_edges.end(), curated_edges.begin(),
                                curated_edges.end(), std::back_inserter(edge_diff));
  return EditDistance{static_cast<std::int64_t>(node_diff.size()),
                      static_cast<std::int64_t>(edge_diff.size())};
}

namespace {

template <typename Range>
bool hit_in_top_k(const Range& ids, const std::set<std::string>& relevant, int k) {
  int seen = 0;
  for (const auto& id : ids) {
    if (seen++ >= k) break;
    if (relevant.count(id)) return true;
  }
  return false;
}

}  // namespace

Fraction grounding_success_rate(const std::vector<GroundingRecord>& records, int k) {
  if (records.empty()) throw EmptyRecordSet("no grounding records");
  if (k < 1) throw InvalidArgument("k must be >= 1");
  std::int64_t hits = 0;
  for (const auto& r : records)
    if (hit_in_top_k(r.candidates, r.relevant, k)) ++hits;
  return Fraction{hits, static_cast<std::int64_t>(records.size())};
}

EvalReport evaluate(const SchemaSession& session, int grounding_k) {
  EvalReport r;
  if (session.generated_steps > 0) {
    auto kept = std::count_if(session.steps.begin(), session.steps.end(), [](const Step& s) {
      return s.selected && s.provenance != Provenance::HumanAdded;
    });
    r.step_accuracy = selection_accuracy(session.generated_steps, kept);
  }
  if (session.generated_nodes > 0) {
    auto kept = std::count_if(session.nodes.begin(), session.nodes.end(), [](const EventNode& n) {
      return n.selected && n.provenance != Provenance::HumanAdded;
    });
    r.node_accuracy = selection_accuracy(session.generated_nodes, kept);
  }
  if (session.model_graph) {
    auto ed = graph_edit_distance(*session.model_graph, session.graph);
    r.graph_node_edit_distance = ed.nodes;
    r.graph_edge_edit_distance = ed.edges;
  }
  // A node succeeds when any method's top-k list holds a candidate the curator marked relevant.
  std::int64_t attempted = 0;
  std::int64_t hits = 0;
  for (const auto& [node_id, g] : session.groundings) {
    if (g.queries.empty()) continue;
    ++attempted;
    std::set<std::string> relevant(g.relevant.begin(), g.relevant.end());
    bool hit = false;
    for (const auto& [method, q] : g.queries) {
      std::vector<std::string> ids;
      for (const auto& c : q.candidates) ids.push_back(c.xpo_id);
      hit = hit || hit_in_top_k(ids, relevant, grounding_k);
    }
    if (hit) ++hits;
  }
  if (attempted > 0) r.grounding_success_rate = Fraction{hits, attempted};
  if (!session.curation_log.empty()) r.elapsed_ms = session.updated_at - session.created_at;
  return r;
}

void to_json(json& j, const EvalReport& r) {
  auto opt_frac = [](const std::optional<Fraction>& f) {
    return f ? json{{"num", f->num}, {"den", f->den}, {"value", f->value()}} : json(nullptr);
  };
  auto opt_int = [](const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); };
  j = json{{"step_accuracy", opt_frac(r.step_accuracy)},
           {"node_accuracy", opt_frac(r.node_accuracy)},
           {"graph_node_edit_distance", opt_int(r.graph_node_edit_distance)},
           {"graph_edge_edit_distance", opt_int(r.graph_edge_edit_distance)},
           {"grounding_success_rate", opt_frac(r.grounding_success_rate)},
           {"elapsed_ms", opt_int(r.elapsed_ms)}};
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  auto frac_row = [&](const char* name, const std::optional<Fraction>& f) {
    char buf[96];
    if (f)
      std::snprintf(buf, sizeof buf, "%-22s %-8s %.4f\n", name, f->str().c_str(), f->value());
    else
      std::snprintf(buf, sizeof buf, "%-22s n/a\n", name);
    out << buf;
  };
  auto int_row = [&](const char* name, const std::optional<std::int64_t>& v) {
    char buf[96];
    if (v)
      std::snprintf(buf, sizeof buf, "%-22s %lld\n", name, static_cast<long long>(*v));
    else
      std::snprintf(buf, sizeof buf, "%-22s n/a\n", name);
    out << buf;
  };
  frac_row("Step Acc", report.step_accuracy);
  frac_row("Node Acc", report.node_accuracy);
  int_row("Graph Node ED", report.graph_node_edit_distance);
  int_row("Graph Edge ED", report.graph_edge_edit_distance);
  frac_row("Grounding Success", report.grounding_success_rate);
  return out.str();
}

}  // namespace schemaloop::core
