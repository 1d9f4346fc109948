#include "schemaloop/store/session_store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "schemaloop/core/serialize.hpp"
#include "schemaloop/core/session.hpp"
#include "schemaloop/error.hpp"
#include "schemaloop/graph/builder.hpp"

namespace schemaloop::store {

namespace fs = std::filesystem;
using nlohmann::json;
using core::SchemaSession;

namespace {

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](unsigned char c) {
           return std::isalnum(c) || c == '-' || c == '_';
         });
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CorruptRecord("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw CorruptRecord(path.string() + ": " + e.what());
  }
}

std::string temp_suffix() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream out;
  out << std::hex << rng();
  return out.str();
}

void write_atomically(const fs::path& target, const std::string& contents) {
  fs::path tmp = target;
  tmp += ".tmp-" + temp_suffix();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageFailure("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw StorageFailure("write to " + tmp.string() + " failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw StorageFailure("cannot replace " + target.string() + ": " + ec.message());
  }
}

}  // namespace

SessionStore::SessionStore(fs::path directory) : dir_(std::move(directory)) {}

fs::path SessionStore::path_for(const std::string& session_id) const {
  if (!valid_id(session_id)) throw NotFound("invalid session id '" + session_id + "'");
  return dir_ / (session_id + ".json");
}

std::mutex& SessionStore::lock_for(const std::string& session_id) const {
  std::lock_guard guard(locks_mu_);
  auto& slot = locks_[session_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string SessionStore::save(const SchemaSession& session) {
  if (!valid_id(session.session_id)) throw StorageFailure("invalid session id '" + session.session_id + "'");
  const fs::path path = path_for(session.session_id);
  std::lock_guard guard(lock_for(session.session_id));

  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw StorageFailure("cannot create " + dir_.string() + ": " + ec.message());

  if (fs::exists(path)) {
    std::vector<core::CurationEvent> stored;
    try {
      stored = read_json(path).at("log").get<std::vector<core::CurationEvent>>();
    } catch (const std::exception& e) {
      throw StorageFailure("stored record for " + session.session_id + " is unreadable: " + e.what());
    }
    const auto& log = session.curation_log;
    if (stored.size() > log.size() || !std::equal(stored.begin(), stored.end(), log.begin()))
      throw StorageFailure("log of " + session.session_id + " does not extend the stored log");
  }

  json snapshot = session;
  snapshot.erase("curation_log");
  json record = {{"schema_version", kSchemaVersion},
                 {"session_id", session.session_id},
                 {"scenario", session.scenario},
                 {"log", session.curation_log},
                 {"snapshot", std::move(snapshot)}};
  write_atomically(path, record.dump());
  return session.session_id;
}

LoadResult SessionStore::load(const std::string& session_id) const {
  const fs::path path = path_for(session_id);
  std::lock_guard guard(lock_for(session_id));
  if (!fs::exists(path)) throw NotFound("unknown session '" + session_id + "'");
  json record = read_json(path);

  LoadResult result;
  std::vector<core::CurationEvent> log;
  try {
    log = record.at("log").get<std::vector<core::CurationEvent>>();
    result.session = core::replay(log);
  } catch (const Error&) {
    throw CorruptRecord("log of " + session_id + " cannot be replayed");
  } catch (const json::exception& e) {
    throw CorruptRecord("log of " + session_id + " is unreadable: " + e.what());
  }

  bool matches = false;
  try {
    json snap = record.at("snapshot");
    snap["curation_log"] = record.at("log");
    matches = snap.get<SchemaSession>() == result.session;
  } catch (const std::exception&) {
    matches = false;
  }
  if (!matches) {
    auto msg = "snapshot of " + session_id + " disagrees with its log; rebuilt from the log";
    spdlog::warn("{}", msg);
    result.warnings.push_back(std::move(msg));
  }
  return result;
}

bool SessionStore::exists(const std::string& session_id) const {
  return valid_id(session_id) && fs::exists(dir_ / (session_id + ".json"));
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> ids;
  std::error_code ec;
  if (!fs::is_directory(dir_, ec)) return ids;
  for (const auto& entry : fs::directory_iterator(dir_, ec)) {
    if (entry.path().extension() == ".json") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

// ---------------------------------------------------------------------------
// Export

json export_schema(const SchemaSession& session) {
  const auto& g = session.graph;
  if (g.empty()) throw EmptyGraph("session " + session.session_id + " has no graph nodes");

  std::map<std::string, std::vector<std::string>> same_time;
  for (const auto& [a, b] : g.same_time) {
    same_time[a].push_back(b);
    same_time[b].push_back(a);
  }

  std::map<std::string, int> node_prov;
  json nodes = json::array();
  for (const auto& gn : g.nodes) {
    json n = {{"id", gn.node_id}};
    std::string prov;
    if (const auto* ev = session.find_node(gn.node_id); ev && !gn.label) {
      n["kind"] = "event";
      n["subject"] = ev->subject;
      n["verb"] = ev->verb;
      n["object"] = ev->object ? json(*ev->object) : json(nullptr);
      n["label"] = ev->label;
      prov = core::to_string(ev->provenance);
    } else {
      n["kind"] = "standalone";
      n["subject"] = nullptr;
      n["verb"] = nullptr;
      n["object"] = nullptr;
      n["label"] = gn.label.value_or(gn.node_id);
      prov = gn.provenance == core::Actor::Human ? "human-added" : "model";
    }
    n["provenance"] = prov;
    ++node_prov[prov];

    json grounding = nullptr;
    if (auto it = session.groundings.find(gn.node_id); it != session.groundings.end() && it->second.chosen_xpo_id) {
      const auto& chosen = *it->second.chosen_xpo_id;
      grounding = {{"xpo_id", chosen}, {"name", nullptr}};
      for (const auto& [method, q] : it->second.queries)
        for (const auto& c : q.candidates)
          if (c.xpo_id == chosen) grounding["name"] = c.name;
    }
    n["grounding"] = grounding;
    auto st = same_time.find(gn.node_id);
    n["same_time_with"] = st == same_time.end() ? json::array() : json(st->second);
    nodes.push_back(std::move(n));
  }

  std::map<std::string, int> edge_prov;
  std::map<std::string, int> edge_kinds;
  json edges = json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"source", e.source},
                     {"target", e.target},
                     {"kind", core::to_string(e.kind)},
                     {"provenance", core::to_string(e.provenance)}});
    ++edge_prov[core::to_string(e.provenance)];
    ++edge_kinds[core::to_string(e.kind)];
  }

  json warnings = json::array();
  for (const auto& cycle : graph::detect_temporal_cycles(g)) {
    std::string text = "temporal cycle:";
    for (const auto& id : cycle) text += " " + id + " ->";
    text += " " + cycle.front();
    warnings.push_back(text);
  }
  for (const auto& id : graph::multi_parent_nodes(g)) warnings.push_back("multiple hierarchical parents: " + id);

  return json{{"schema_version", kSchemaVersion},
              {"scenario", session.scenario},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)},
              {"provenance", {{"nodes", node_prov}, {"edges", edge_prov}}},
              {"counts",
               {{"nodes", g.nodes.size()},
                {"edges", g.edges.size()},
                {"temporal_edges", edge_kinds["temporal"]},
                {"hierarchical_edges", edge_kinds["hierarchical"]}}},
              {"warnings", std::move(warnings)}};
}

std::string export_schema_text(const SchemaSession& session) { return export_schema(session).dump(2) + "\n"; }

}  // namespace schemaloop::store
