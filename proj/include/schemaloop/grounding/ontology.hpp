#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace schemaloop::grounding {

struct OntologyNode {
  std::string xpo_id;
  std::string name;
  std::string definition;
  std::vector<std::string> similar_names;

  bool operator==(const OntologyNode&) const = default;
};

// Immutable after load; safe to share between threads.
class Ontology {
 public:
  Ontology() = default;

  // JSON array of {"id", "name", "definition", "similar": [names]}.
  // Throws MalformedOntologyFile, DuplicateName. Similar names that resolve to no
  // node are dropped and reported through warnings().
  static Ontology from_json(const nlohmann::json& doc);
  static Ontology from_file(const std::filesystem::path& path);

  const std::vector<OntologyNode>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }

  // Case-folded exact name lookup.
  const OntologyNode* find_by_name(const std::string& name) const;
  const OntologyNode* find_by_id(const std::string& xpo_id) const;

  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  std::vector<OntologyNode> nodes_;
  std::map<std::string, std::size_t> by_name_;
  std::map<std::string, std::size_t> by_id_;
  std::vector<std::string> warnings_;
};

}  // namespace schemaloop::grounding
