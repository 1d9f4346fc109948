#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaloop/core/types.hpp"
#include "schemaloop/grounding/embeddings.hpp"
#include "schemaloop/grounding/ontology.hpp"
#include "schemaloop/service/pipeline.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using Rng = std::mt19937_64;

fs::path fixture(const std::string& relative);
nlohmann::json read_json(const fs::path& path);
std::string read_text(const fs::path& path);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------
// Oracles. Written independently of the library code they check.

struct GedCount {
  std::int64_t nodes = 0;
  std::int64_t edges = 0;
};

// Counts, for each side, the entities with no identical counterpart on the other.
GedCount brute_force_ged(const schemaloop::core::SchemaGraph& a, const schemaloop::core::SchemaGraph& b);

// Every simple temporal cycle, found by trying each node sequence up to n long.
// Each cycle is rotated to its smallest node position; the result is sorted.
std::vector<std::vector<std::string>> brute_force_cycles(const schemaloop::core::SchemaGraph& g);

struct Ranked {
  std::string xpo_id;
  double score;
};

// Scores every ontology name against the label with a naive long-double cosine and
// sorts by (score desc, xpo_id asc).
std::vector<Ranked> brute_force_similarity(const std::string& label, const schemaloop::grounding::Ontology& ontology,
                                           const schemaloop::grounding::EmbeddingStore& embeddings);

// ---------------------------------------------------------------------------
// Generators.

// Graph over ids n0..n{count-1} with random temporal and hierarchical edges.
schemaloop::core::SchemaGraph random_graph(Rng& rng, int max_nodes, int id_space);

// A random event that may or may not be valid for the session.
schemaloop::core::CurationEvent random_event(Rng& rng, const schemaloop::core::SchemaSession& session);

// Session built by `length` random events; rejected ones are skipped.
schemaloop::core::SchemaSession random_session(Rng& rng, int length);

std::string random_phrase(Rng& rng, const std::vector<std::string>& vocabulary, int max_words);

// ---------------------------------------------------------------------------
// Case study.

schemaloop::service::ResourcePaths case_study_paths();
schemaloop::service::PipelineOptions case_study_options();

// Strips the fields that legitimately differ between two runs of the same inputs
// (session id, timestamps) so sessions can be compared.
nlohmann::json comparable(const schemaloop::core::SchemaSession& session);

}  // namespace testsupport
