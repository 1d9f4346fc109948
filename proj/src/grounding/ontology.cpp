#include "schemaloop/grounding/ontology.hpp"

#include <fstream>

#include <spdlog/spdlog.h>

#include "schemaloop/error.hpp"
#include "schemaloop/util/text.hpp"

namespace schemaloop::grounding {

using nlohmann::json;

namespace {
std::string fold(const std::string& s) { return text::to_lower(text::trim(s)); }
}  // namespace

Ontology Ontology::from_json(const json& doc) {
  if (!doc.is_array()) throw MalformedOntologyFile("ontology must be a JSON array");
  Ontology o;
  for (const auto& entry : doc) {
    OntologyNode node;
    try {
      node.xpo_id = entry.at("id").get<std::string>();
      node.name = entry.at("name").get<std::string>();
      node.definition = entry.value("definition", std::string());
      if (entry.contains("similar")) node.similar_names = entry.at("similar").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw MalformedOntologyFile(std::string("ontology entry: ") + e.what());
    }
    if (node.xpo_id.empty() || fold(node.name).empty())
      throw MalformedOntologyFile("ontology entries need a non-empty id and name");
    if (o.by_id_.count(node.xpo_id)) throw MalformedOntologyFile("duplicate ontology id '" + node.xpo_id + "'");
    if (o.by_name_.count(fold(node.name))) throw DuplicateName("duplicate ontology name '" + node.name + "'");
    o.by_id_[node.xpo_id] = o.nodes_.size();
    o.by_name_[fold(node.name)] = o.nodes_.size();
    o.nodes_.push_back(std::move(node));
  }
  for (auto& node : o.nodes_) {
    std::vector<std::string> kept;
    for (const auto& name : node.similar_names) {
      if (o.by_name_.count(fold(name))) {
        kept.push_back(name);
      } else {
        auto msg = "ontology node '" + node.name + "' lists unknown similar name '" + name + "'";
        spdlog::warn("{}", msg);
        o.warnings_.push_back(std::move(msg));
      }
    }
    node.similar_names = std::move(kept);
  }
  return o;
}

Ontology Ontology::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedOntologyFile("cannot open ontology file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw MalformedOntologyFile(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

const OntologyNode* Ontology::find_by_name(const std::string& name) const {
  auto it = by_name_.find(fold(name));
  return it == by_name_.end() ? nullptr : &nodes_[it->second];
}

const OntologyNode* Ontology::find_by_id(const std::string& xpo_id) const {
  auto it = by_id_.find(xpo_id);
  return it == by_id_.end() ? nullptr : &nodes_[it->second];
}

}  // namespace schemaloop::grounding
