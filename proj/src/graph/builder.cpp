#include "schemaloop/graph/builder.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "schemaloop/error.hpp"

namespace schemaloop::graph {

using core::Actor;
using core::Edge;
using core::EdgeKind;

std::vector<std::pair<std::size_t, std::size_t>> enumerate_pairs(std::size_t node_count) {
  if (node_count < 2) throw TooFewNodes("graph construction needs at least two nodes");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(node_count * (node_count - 1) / 2);
  for (std::size_t i = 0; i < node_count; ++i)
    for (std::size_t j = i + 1; j < node_count; ++j) pairs.emplace_back(i, j);
  return pairs;
}

namespace {

// +1: edge a->b, -1: edge b->a, 0: no directional claim.
int direction(Relation ab_forward, Relation ab_backward, const RelationAnswer& ab,
              const RelationAnswer& ba, bool& conflict) {
  auto claim = [&](const RelationAnswer& ans, int sign) {
    if (ans.value == ab_forward) return sign;
    if (ans.value == ab_backward) return -sign;
    return 0;
  };
  int d_ab = claim(ab, +1);
  int d_ba = claim(ba, -1);
  conflict = d_ab != 0 && d_ba != 0 && d_ab != d_ba;
  if (conflict) return 0;
  return d_ab != 0 ? d_ab : d_ba;
}

std::optional<Edge> edge_for(int dir, const PairVerdict& v, EdgeKind kind) {
  if (dir > 0) return Edge{v.node_a, v.node_b, kind, Actor::Model};
  if (dir < 0) return Edge{v.node_b, v.node_a, kind, Actor::Model};
  return std::nullopt;
}

}  // namespace

PairResolution resolve_pair(const PairVerdict& v) {
  PairResolution r;
  r.same_time = v.temporal_ab.value == Relation::SameTime || v.temporal_ba.value == Relation::SameTime;
  if (!r.same_time) {
    int dir = direction(Relation::Before, Relation::After, v.temporal_ab, v.temporal_ba, r.temporal_conflict);
    r.temporal = edge_for(dir, v, EdgeKind::Temporal);
  }
  int dir = direction(Relation::Parent, Relation::Child, v.hierarchical_ab, v.hierarchical_ba,
                      r.hierarchical_conflict);
  r.hierarchical = edge_for(dir, v, EdgeKind::Hierarchical);
  return r;
}

BuildResult build_graph(const std::vector<NodeRef>& nodes, const RelationAsker& asker,
                        const BuildOptions& options) {
  const auto pairs = enumerate_pairs(nodes.size());
  const std::size_t total = pairs.size() * 4;

  struct Question {
    std::size_t first;
    std::size_t second;
    Axis axis;
  };
  std::vector<Question> questions;
  questions.reserve(total);
  for (const auto& [i, j] : pairs) {
    questions.push_back({i, j, Axis::Temporal});
    questions.push_back({j, i, Axis::Temporal});
    questions.push_back({i, j, Axis::Hierarchical});
    questions.push_back({j, i, Axis::Hierarchical});
  }

  std::vector<RelationAnswer> answers(total);
  std::vector<std::string> failures(total);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mu;
  std::size_t answered = 0;

  auto worker = [&] {
    for (std::size_t q = next++; q < total; q = next++) {
      const auto& question = questions[q];
      RelationAnswer ans{question.axis, Relation::NoRelation};
      try {
        ans = asker(nodes[question.first], nodes[question.second], question.axis);
        if (ans.axis != question.axis || !prompt::legal_for(question.axis, ans.value))
          ans = RelationAnswer{question.axis, Relation::NoRelation};
      } catch (const std::exception& e) {
        failures[q] = e.what();
        ans = RelationAnswer{question.axis, Relation::NoRelation};
      }
      answers[q] = ans;
      std::lock_guard lock(progress_mu);
      ++answered;
      if (options.on_progress) options.on_progress(answered, total);
    }
  };

  std::size_t workers = std::clamp<std::size_t>(options.max_in_flight, 1, total);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  BuildResult result;
  result.questions_asked = total;
  for (const auto& n : nodes) result.graph.nodes.push_back(core::GraphNode{n.id, std::nullopt, Actor::Model});
  for (std::size_t q = 0; q < total; ++q) {
    if (failures[q].empty()) continue;
    const auto& question = questions[q];
    auto msg = "relation question (" + nodes[question.first].id + ", " + nodes[question.second].id + ", " +
               prompt::to_string(question.axis) + ") failed: " + failures[q];
    spdlog::warn("{}", msg);
    result.warnings.push_back(std::move(msg));
  }

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& a = nodes[pairs[p].first];
    const auto& b = nodes[pairs[p].second];
    PairVerdict v{a.id, b.id, answers[4 * p], answers[4 * p + 1], answers[4 * p + 2], answers[4 * p + 3]};
    auto r = resolve_pair(v);
    if (r.temporal) result.graph.edges.push_back(*r.temporal);
    if (r.hierarchical) result.graph.edges.push_back(*r.hierarchical);
    if (r.same_time) result.graph.same_time.emplace_back(a.id, b.id);
    if (r.temporal_conflict)
      result.warnings.push_back("conflicting temporal answers for (" + a.id + ", " + b.id + "); no edge");
    if (r.hierarchical_conflict)
      result.warnings.push_back("conflicting hierarchical answers for (" + a.id + ", " + b.id + "); no edge");
  }
  return result;
}

std::vector<std::vector<std::string>> detect_temporal_cycles(const core::SchemaGraph& graph) {
  std::map<std::string, std::size_t> index;
  for (const auto& n : graph.nodes) index.emplace(n.node_id, index.size());
  const std::size_t n = index.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : graph.edges) {
    if (e.kind != EdgeKind::Temporal) continue;
    auto s = index.find(e.source);
    auto t = index.find(e.target);
    if (s == index.end() || t == index.end()) continue;
    adj[s->second].push_back(t->second);
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }

  // Each elementary cycle is found exactly once, from its lowest-index node,
  // by only walking through higher-index nodes.
  std::vector<std::vector<std::string>> cycles;
  std::vector<std::size_t> path;
  std::vector<bool> on_path(n, false);
  std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t start, std::size_t v) {
    for (auto w : adj[v]) {
      if (w == start) {
        std::vector<std::string> cycle;
        for (auto idx : path) cycle.push_back(graph.nodes[idx].node_id);
        cycles.push_back(std::move(cycle));
      } else if (w > start && !on_path[w]) {
        on_path[w] = true;
        path.push_back(w);
        walk(start, w);
        path.pop_back();
        on_path[w] = false;
      }
    }
  };
  for (std::size_t s = 0; s < n; ++s) {
    path = {s};
    on_path.assign(n, false);
    on_path[s] = true;
    walk(s, s);
  }
  return cycles;
}

std::vector<std::string> multi_parent_nodes(const core::SchemaGraph& graph) {
  std::map<std::string, int> parents;
  for (const auto& e : graph.edges)
    if (e.kind == EdgeKind::Hierarchical) ++parents[e.target];
  std::vector<std::string> out;
  for (const auto& n : graph.nodes)
    if (parents[n.node_id] > 1) out.push_back(n.node_id);
  return out;
}

}  // namespace schemaloop::graph
