#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace schemaloop {

// Every failure raised by the library derives from Error and carries a stable
// machine-readable code. The api-service maps codes onto its ApiError enum.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define SCHEMALOOP_DEFINE_ERROR(Name, code_str)                         \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& message) : Error(code_str, message) {} \
  };

// llm-gateway
class TransportError : public Error {
 public:
  TransportError(const std::string& message, std::size_t attempts)
      : Error("transport_error", message), attempts_(attempts) {}
  std::size_t attempts() const noexcept { return attempts_; }

 private:
  std::size_t attempts_;
};
SCHEMALOOP_DEFINE_ERROR(ProviderError, "provider_error")
SCHEMALOOP_DEFINE_ERROR(MissingCredential, "missing_credential")
SCHEMALOOP_DEFINE_ERROR(UnknownProviderKind, "unknown_provider_kind")
SCHEMALOOP_DEFINE_ERROR(MalformedScriptFile, "malformed_script_file")
SCHEMALOOP_DEFINE_ERROR(InvalidRequest, "invalid_request")

// prompt-engine
SCHEMALOOP_DEFINE_ERROR(UnknownTemplate, "unknown_template")
SCHEMALOOP_DEFINE_ERROR(MalformedTemplateFile, "malformed_template_file")
SCHEMALOOP_DEFINE_ERROR(NoTuplesFound, "no_tuples_found")

class MissingParam : public Error {
 public:
  explicit MissingParam(std::string name)
      : Error("missing_param", "missing template parameter: " + name), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

// schema-core
SCHEMALOOP_DEFINE_ERROR(EmptyScenario, "empty_scenario")
SCHEMALOOP_DEFINE_ERROR(UnknownEntity, "unknown_entity")
SCHEMALOOP_DEFINE_ERROR(MalformedPayload, "malformed_payload")
SCHEMALOOP_DEFINE_ERROR(DivisionByZero, "division_by_zero")
SCHEMALOOP_DEFINE_ERROR(InvalidArgument, "invalid_argument")
SCHEMALOOP_DEFINE_ERROR(EmptyRecordSet, "empty_record_set")

// graph-builder
SCHEMALOOP_DEFINE_ERROR(TooFewNodes, "too_few_nodes")

// grounding-engine
SCHEMALOOP_DEFINE_ERROR(MalformedOntologyFile, "malformed_ontology_file")
SCHEMALOOP_DEFINE_ERROR(DuplicateName, "duplicate_name")
SCHEMALOOP_DEFINE_ERROR(MalformedEmbeddingFile, "malformed_embedding_file")
SCHEMALOOP_DEFINE_ERROR(ScorerError, "scorer_error")

// session-store
SCHEMALOOP_DEFINE_ERROR(StorageFailure, "storage_failure")
SCHEMALOOP_DEFINE_ERROR(NotFound, "not_found")
SCHEMALOOP_DEFINE_ERROR(CorruptRecord, "corrupt_record")
SCHEMALOOP_DEFINE_ERROR(EmptyGraph, "empty_graph")

// configuration problems surfaced by the CLI and server
SCHEMALOOP_DEFINE_ERROR(ConfigError, "config_error")
SCHEMALOOP_DEFINE_ERROR(BadStageParams, "bad_stage_params")

#undef SCHEMALOOP_DEFINE_ERROR

}  // namespace schemaloop
