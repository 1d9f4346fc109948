#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaloop/core/types.hpp"

namespace schemaloop::core {

std::int64_t now_ms();

// 32 lowercase hex chars from a random 128-bit value.
std::string new_session_id();

CurationEvent make_event(Actor actor, Action action, nlohmann::json payload);

// Checks the payload against the fixed per-action schema (field presence and
// types only; entity references are checked when applied). Throws MalformedPayload.
void validate_payload(Action action, const nlohmann::json& payload);

// An empty session at step-generation whose log holds one create-session event.
// Throws EmptyScenario.
SchemaSession create_session(const std::string& scenario,
                             std::optional<std::string> session_id = std::nullopt,
                             std::int64_t timestamp = 0);

struct ApplyResult {
  // The event as appended: ids assigned to new entities are written back into
  // its payload, so replaying the log reproduces them.
  CurationEvent event;
  // Entities touched by the event, for echoing to clients.
  nlohmann::json changed;
};

// Applies one event and appends it to the log. The session is left untouched
// when the event is rejected (UnknownEntity, MalformedPayload).
ApplyResult apply_curation(SchemaSession& session, CurationEvent event);

// Rebuilds a session by applying every event of `log` to an empty session.
SchemaSession replay(const std::vector<CurationEvent>& log);

}  // namespace schemaloop::core
