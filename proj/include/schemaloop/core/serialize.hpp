#pragma once

#include <nlohmann/json.hpp>

#include "schemaloop/core/types.hpp"

// nlohmann/json ADL hooks for the session model. Enums serialize as their
// kebab-case names; optional fields serialize as null.
namespace schemaloop::core {

void to_json(nlohmann::json& j, Stage v);
void from_json(const nlohmann::json& j, Stage& v);
void to_json(nlohmann::json& j, Provenance v);
void from_json(const nlohmann::json& j, Provenance& v);
void to_json(nlohmann::json& j, Actor v);
void from_json(const nlohmann::json& j, Actor& v);
void to_json(nlohmann::json& j, EdgeKind v);
void from_json(const nlohmann::json& j, EdgeKind& v);
void to_json(nlohmann::json& j, GroundingMethod v);
void from_json(const nlohmann::json& j, GroundingMethod& v);
void to_json(nlohmann::json& j, Action v);
void from_json(const nlohmann::json& j, Action& v);

void to_json(nlohmann::json& j, const Step& v);
void from_json(const nlohmann::json& j, Step& v);
void to_json(nlohmann::json& j, const EventNode& v);
void from_json(const nlohmann::json& j, EventNode& v);
void to_json(nlohmann::json& j, const GraphNode& v);
void from_json(const nlohmann::json& j, GraphNode& v);
void to_json(nlohmann::json& j, const Edge& v);
void from_json(const nlohmann::json& j, Edge& v);
void to_json(nlohmann::json& j, const SchemaGraph& v);
void from_json(const nlohmann::json& j, SchemaGraph& v);
void to_json(nlohmann::json& j, const CandidateRecord& v);
void from_json(const nlohmann::json& j, CandidateRecord& v);
void to_json(nlohmann::json& j, const GroundingQuery& v);
void from_json(const nlohmann::json& j, GroundingQuery& v);
void to_json(nlohmann::json& j, const NodeGrounding& v);
void from_json(const nlohmann::json& j, NodeGrounding& v);
void to_json(nlohmann::json& j, const CurationEvent& v);
void from_json(const nlohmann::json& j, CurationEvent& v);
void to_json(nlohmann::json& j, const SchemaSession& v);
void from_json(const nlohmann::json& j, SchemaSession& v);

}  // namespace schemaloop::core
