#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaloop/core/types.hpp"

namespace schemaloop::store {

inline constexpr int kSchemaVersion = 1;

struct LoadResult {
  core::SchemaSession session;
  std::vector<std::string> warnings;
};

// One JSON file per session: {schema_version, session_id, scenario, log, snapshot}.
// Writes go through a temp file and a rename, serialized per session.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path directory);

  // Throws StorageFailure when the directory is unwritable or the session's log
  // does not extend the stored one.
  std::string save(const core::SchemaSession& session);

  // Replays the stored log and compares it with the snapshot; on mismatch the
  // replayed session wins and a warning is returned. Throws NotFound, CorruptRecord.
  LoadResult load(const std::string& session_id) const;

  bool exists(const std::string& session_id) const;
  std::vector<std::string> list() const;
  const std::filesystem::path& directory() const noexcept { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& session_id) const;
  std::mutex& lock_for(const std::string& session_id) const;

  std::filesystem::path dir_;
  mutable std::mutex locks_mu_;
  mutable std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

// Self-contained schema document (no session id or timestamps). Throws EmptyGraph.
nlohmann::json export_schema(const core::SchemaSession& session);

// export_schema rendered with sorted keys, two-space indent and a trailing newline.
std::string export_schema_text(const core::SchemaSession& session);

}  // namespace schemaloop::store
