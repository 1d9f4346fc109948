#include "support.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <spdlog/spdlog.h>

#include "schemaloop/core/serialize.hpp"
#include "schemaloop/core/session.hpp"
#include "schemaloop/error.hpp"

namespace testsupport {

using namespace schemaloop;
using nlohmann::json;
using core::Action;
using core::CurationEvent;
using core::EdgeKind;
using core::SchemaGraph;
using core::SchemaSession;

// Library diagnostics are asserted on directly; keep test output readable.
const bool kQuietLogs = [] {
  spdlog::set_level(spdlog::level::err);
  return true;
}();

fs::path fixture(const std::string& relative) { return fs::path(SCHEMALOOP_FIXTURES) / relative; }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

TempDir::TempDir() {
  static std::random_device rd;
  std::ostringstream name;
  name << "schemaloop-test-" << std::hex << rd() << rd();
  path_ = fs::temp_directory_path() / name.str();
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

// ---------------------------------------------------------------------------

GedCount brute_force_ged(const SchemaGraph& a, const SchemaGraph& b) {
  GedCount out;
  auto node_missing = [](const SchemaGraph& from, const SchemaGraph& in) {
    std::int64_t n = 0;
    for (const auto& x : from.nodes) {
      bool found = false;
      for (const auto& y : in.nodes) found = found || x.node_id == y.node_id;
      if (!found) ++n;
    }
    return n;
  };
  auto edge_missing = [](const SchemaGraph& from, const SchemaGraph& in) {
    std::int64_t n = 0;
    for (const auto& x : from.edges) {
      bool found = false;
      for (const auto& y : in.edges)
        found = found || (x.source == y.source && x.target == y.target && x.kind == y.kind);
      if (!found) ++n;
    }
    return n;
  };
  out.nodes = node_missing(a, b) + node_missing(b, a);
  out.edges = edge_missing(a, b) + edge_missing(b, a);
  return out;
}

std::vector<std::vector<std::string>> brute_force_cycles(const SchemaGraph& g) {
  const std::size_t n = g.nodes.size();
  auto linked = [&](std::size_t i, std::size_t j) {
    return g.has_edge(g.nodes[i].node_id, g.nodes[j].node_id, EdgeKind::Temporal);
  };
  std::set<std::vector<std::size_t>> found;
  // Walk every sequence of distinct node positions whose first element is its minimum.
  std::vector<std::size_t> seq;
  std::vector<bool> used(n, false);
  std::function<void()> extend = [&] {
    if (seq.size() >= 2 && linked(seq.back(), seq.front())) {
      bool path_ok = true;
      for (std::size_t i = 0; i + 1 < seq.size(); ++i) path_ok = path_ok && linked(seq[i], seq[i + 1]);
      if (path_ok) found.insert(seq);
    }
    if (seq.size() == n) return;
    for (std::size_t next = 0; next < n; ++next) {
      if (used[next] || (!seq.empty() && next < seq.front())) continue;
      used[next] = true;
      seq.push_back(next);
      extend();
      seq.pop_back();
      used[next] = false;
    }
  };
  extend();
  std::vector<std::vector<std::string>> out;
  for (const auto& cycle : found) {
    std::vector<std::string> ids;
    for (auto i : cycle) ids.push_back(g.nodes[i].node_id);
    out.push_back(ids);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::vector<std::string> naive_tokens(const std::string& phrase) {
  std::vector<std::string> out;
  std::istringstream in(phrase);
  std::string word;
  while (in >> word) {
    std::size_t b = 0, e = word.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(word[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1]))) --e;
    std::string t;
    for (std::size_t i = b; i < e; ++i) t += static_cast<char>(std::tolower(static_cast<unsigned char>(word[i])));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::optional<std::vector<long double>> naive_embed(const std::string& phrase,
                                                    const grounding::EmbeddingStore& store) {
  std::vector<long double> sum(store.dimension(), 0.0L);
  int known = 0;
  for (const auto& t : naive_tokens(phrase)) {
    const auto* v = store.find(t);
    if (!v) continue;
    ++known;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
  }
  if (known == 0) return std::nullopt;
  for (auto& x : sum) x /= known;
  return sum;
}

}  // namespace

std::vector<Ranked> brute_force_similarity(const std::string& label, const grounding::Ontology& ontology,
                                           const grounding::EmbeddingStore& embeddings) {
  std::vector<Ranked> out;
  auto q = naive_embed(label, embeddings);
  if (!q) return out;
  for (const auto& node : ontology.nodes()) {
    auto v = naive_embed(node.name, embeddings);
    if (!v) continue;
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < v->size(); ++i) {
      dot += (*q)[i] * (*v)[i];
      na += (*q)[i] * (*q)[i];
      nb += (*v)[i] * (*v)[i];
    }
    long double cos = (na == 0 || nb == 0) ? 0.0L : dot / (std::sqrt(na) * std::sqrt(nb));
    cos = std::clamp(cos, -1.0L, 1.0L);
    out.push_back({node.xpo_id, static_cast<double>(cos)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Ranked& x, const Ranked& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.xpo_id < y.xpo_id;
  });
  return out;
}

// ---------------------------------------------------------------------------

namespace {

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(items.size()) - 1))];
}

const std::vector<std::string> kWords = {"attacker", "system", "data", "evacuation", "shelter", "bus",
                                         "residents", "gather", "access", "plan", "warning", "food",
                                         "escalate", "privileges", "target", "police"};

std::string kind_name(Rng& rng) { return coin(rng) ? "temporal" : "hierarchical"; }

}  // namespace

std::string random_phrase(Rng& rng, const std::vector<std::string>& vocabulary, int max_words) {
  std::string out;
  int n = uniform(rng, 1, max_words);
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += pick(rng, vocabulary);
  }
  return out;
}

SchemaGraph random_graph(Rng& rng, int max_nodes, int id_space) {
  SchemaGraph g;
  std::vector<int> ids(static_cast<std::size_t>(id_space));
  for (int i = 0; i < id_space; ++i) ids[static_cast<std::size_t>(i)] = i;
  std::shuffle(ids.begin(), ids.end(), rng);
  int count = uniform(rng, 0, std::min(max_nodes, id_space));
  for (int i = 0; i < count; ++i)
    g.nodes.push_back({"n" + std::to_string(ids[static_cast<std::size_t>(i)]), std::nullopt, core::Actor::Model});
  for (const auto& a : g.nodes)
    for (const auto& b : g.nodes) {
      if (a.node_id == b.node_id) continue;
      if (coin(rng, 0.3)) g.edges.push_back({a.node_id, b.node_id, EdgeKind::Temporal, core::Actor::Model});
      if (coin(rng, 0.15)) g.edges.push_back({a.node_id, b.node_id, EdgeKind::Hierarchical, core::Actor::Model});
    }
  std::shuffle(g.edges.begin(), g.edges.end(), rng);
  return g;
}

CurationEvent random_event(Rng& rng, const SchemaSession& s) {
  std::vector<std::string> step_ids, node_ids, graph_ids;
  for (const auto& st : s.steps) step_ids.push_back(st.step_id);
  for (const auto& n : s.nodes) node_ids.push_back(n.node_id);
  for (const auto& gn : s.graph.nodes) graph_ids.push_back(gn.node_id);
  // Occasionally reference something that does not exist.
  auto some = [&](const std::vector<std::string>& ids, const char* prefix) {
    if (ids.empty() || coin(rng, 0.08)) return std::string(prefix) + "-" + std::to_string(uniform(rng, 50, 99));
    return pick(rng, ids);
  };
  auto edge_payload = [&] {
    json p{{"source", some(graph_ids, "node")}, {"target", some(graph_ids, "node")}, {"kind", kind_name(rng)}};
    if (!s.graph.edges.empty() && coin(rng, 0.6)) {
      const auto& e = pick(rng, s.graph.edges);
      p = json{{"source", e.source}, {"target", e.target}, {"kind", core::to_string(e.kind)}};
    }
    return p;
  };

  CurationEvent ev;
  ev.actor = coin(rng, 0.7) ? core::Actor::Human : core::Actor::Model;
  json p = json::object();
  switch (uniform(rng, 0, 18)) {
    case 0:
    case 1: {
      ev.action = Action::GenerateSteps;
      ev.actor = core::Actor::Model;
      json steps = json::array();
      for (int i = uniform(rng, 1, 4); i > 0; --i) {
        json item{{"text", random_phrase(rng, kWords, 5)}};
        if (!step_ids.empty() && coin(rng, 0.2)) item["parent_step_id"] = pick(rng, step_ids);
        steps.push_back(item);
      }
      p = {{"template_id", "sub-steps"}, {"steps", steps}};
      break;
    }
    case 2:
      ev.action = Action::SelectStep;
      p = {{"step_id", some(step_ids, "step")}, {"selected", coin(rng)}};
      break;
    case 3:
      ev.action = Action::EditStep;
      p = {{"step_id", some(step_ids, "step")}, {"text", coin(rng, 0.9) ? random_phrase(rng, kWords, 6) : "  "}};
      break;
    case 4:
      ev.action = Action::AddStep;
      p = {{"text", random_phrase(rng, kWords, 4)}};
      break;
    case 5:
      ev.action = Action::DeleteStep;
      p = {{"step_id", some(step_ids, "step")}};
      break;
    case 6:
    case 7: {
      ev.action = Action::ExtractNodes;
      ev.actor = core::Actor::Model;
      json nodes = json::array();
      for (int i = uniform(rng, 1, 3); i > 0; --i) {
        json item{{"subject", pick(rng, kWords)}, {"verb", pick(rng, kWords)}};
        item["object"] = coin(rng, 0.3) ? json(nullptr) : json(random_phrase(rng, kWords, 3));
        nodes.push_back(item);
      }
      p = {{"method", "llm"}, {"nodes", nodes}};
      if (!step_ids.empty()) p["source_step_id"] = some(step_ids, "step");
      break;
    }
    case 8:
      ev.action = Action::SelectNode;
      p = {{"node_id", some(node_ids, "node")}, {"selected", coin(rng)}};
      break;
    case 9:
      ev.action = Action::EditNode;
      p = {{"node_id", some(node_ids, "node")}};
      if (coin(rng)) p["verb"] = pick(rng, kWords);
      if (coin(rng)) p["object"] = coin(rng, 0.3) ? json(nullptr) : json(pick(rng, kWords));
      break;
    case 10:
      ev.action = Action::AddNode;
      p = {{"subject", pick(rng, kWords)}, {"verb", pick(rng, kWords)}, {"object", pick(rng, kWords)}};
      break;
    case 11:
      ev.action = Action::DeleteNode;
      p = {{"node_id", some(node_ids, "node")}};
      break;
    case 12: {
      ev.action = Action::BuildGraph;
      ev.actor = core::Actor::Model;
      std::vector<std::string> chosen;
      for (const auto& id : node_ids)
        if (coin(rng, 0.7)) chosen.push_back(id);
      json edges = json::array();
      std::set<std::tuple<std::string, std::string, std::string>> seen;
      for (const auto& a : chosen)
        for (const auto& b : chosen)
          if (a != b && coin(rng, 0.25)) {
            auto kind = kind_name(rng);
            if (seen.insert({a, b, kind}).second) edges.push_back({{"source", a}, {"target", b}, {"kind", kind}});
          }
      json same = json::array();
      if (chosen.size() >= 2 && coin(rng, 0.3)) same.push_back({chosen[0], chosen[1]});
      p = {{"node_ids", chosen}, {"edges", edges}, {"same_time", same}};
      break;
    }
    case 13:
      ev.action = Action::AddEdge;
      p = {{"source", some(graph_ids, "node")}, {"target", some(graph_ids, "node")}, {"kind", kind_name(rng)}};
      break;
    case 14:
      ev.action = Action::DeleteEdge;
      p = edge_payload();
      break;
    case 15:
      ev.action = Action::EditEdge;
      p = edge_payload();
      if (coin(rng)) p["new_kind"] = kind_name(rng);
      if (coin(rng)) p["new_target"] = some(graph_ids, "node");
      break;
    case 16:
      ev.action = Action::AddGraphNode;
      if (coin(rng) && !node_ids.empty())
        p = {{"node_id", pick(rng, node_ids)}};
      else
        p = {{"label", random_phrase(rng, kWords, 2)}};
      break;
    case 17: {
      ev.action = Action::GroundQuery;
      ev.actor = core::Actor::Model;
      json cands = json::array();
      int k = uniform(rng, 1, 4);
      const int count = uniform(rng, 0, k);
      for (int r = 1; r <= count; ++r)
        cands.push_back({{"xpo_id", "xpo:" + std::to_string(uniform(rng, 1000, 1020))},
                         {"name", pick(rng, kWords)},
                         {"score", 1.0 / r},
                         {"rank", r}});
      p = {{"node_id", some(graph_ids.empty() ? node_ids : graph_ids, "node")},
           {"method", coin(rng) ? "similarity" : "inference"},
           {"k", k},
           {"candidates", cands},
           {"warnings", json::array()}};
      break;
    }
    default: {
      if (coin(rng, 0.3)) {
        ev.action = Action::DeleteGraphNode;
        p = {{"node_id", some(graph_ids, "node")}};
      } else {
        ev.action = Action::ChooseGrounding;
        std::string xpo = "xpo:" + std::to_string(uniform(rng, 1000, 1020));
        p = {{"node_id", some(node_ids, "node")}, {"xpo_id", coin(rng, 0.2) ? json(nullptr) : json(xpo)}};
        if (coin(rng)) p["relevant"] = json::array({"xpo:" + std::to_string(uniform(rng, 1000, 1020))});
      }
      break;
    }
  }
  ev.payload = p;
  return ev;
}

SchemaSession random_session(Rng& rng, int length) {
  auto s = core::create_session(random_phrase(rng, kWords, 2), "s" + std::to_string(rng() % 100000), 1000);
  std::int64_t clock = 1000;
  for (int i = 0; i < length; ++i) {
    auto ev = random_event(rng, s);
    ev.timestamp = ++clock;
    try {
      core::apply_curation(s, ev);
    } catch (const Error&) {
    }
  }
  return s;
}

// ---------------------------------------------------------------------------

service::ResourcePaths case_study_paths() {
  service::ResourcePaths paths;
  paths.provider_config = fixture("case_study/provider.json");
  paths.ontology = fixture("ontology.json");
  paths.embeddings = fixture("embeddings.txt");
  return paths;
}

service::PipelineOptions case_study_options() {
  service::PipelineOptions options;
  options.scenario = "cyber attack";
  options.edits = {{service::PipelineStage::StepGeneration, fixture("case_study/edits_steps.json")},
                   {service::PipelineStage::NodeExtraction, fixture("case_study/edits_nodes.json")},
                   {service::PipelineStage::GraphConstruction, fixture("case_study/edits_graph.json")},
                   {service::PipelineStage::Grounding, fixture("case_study/edits_grounding.json")}};
  return options;
}

json comparable(const SchemaSession& session) {
  json j = session;
  j.erase("session_id");
  j.erase("created_at");
  j.erase("updated_at");
  for (auto& ev : j["curation_log"]) {
    ev.erase("timestamp");
    ev["payload"].erase("session_id");
  }
  return j;
}

}  // namespace testsupport
