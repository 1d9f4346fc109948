#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace schemaloop::llm {

struct CompletionRequest {
  std::string prompt;
  std::string model_id;
  int max_tokens = 256;
  double temperature = 0.7;
  std::vector<std::string> stop_sequences;
};

// Throws InvalidRequest when the request violates its invariants.
void validate(const CompletionRequest& request);

struct CompletionResult {
  std::string text;
  std::string provider_id;
  std::int64_t latency_ms = 0;
};

// Cuts text at the earliest occurrence of any stop sequence. Nothing else changes.
std::string strip_stop_sequences(const std::string& text, const std::vector<std::string>& stops);

// Provider handles are shared between concurrent callers; complete() must be thread-safe.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
  virtual std::string provider_id() const = 0;
};

enum class KeyMode { ExactPrompt, PromptDigest };

// Whitespace-collapsed prompt; digest keys hash this form.
std::string normalize_prompt(const std::string& prompt);
// "digest:<fnv1a-64 hex of normalize_prompt(prompt)>"
std::string prompt_digest_key(const std::string& prompt);

// Replays canned completions. Each key owns an ordered queue that is consumed
// one completion per matching call, so re-prompting the same text walks the list.
//
// In ExactPrompt mode keys are matched verbatim. In PromptDigest mode literal keys
// are digested at construction and "digest:..." keys are used as given, so a prompt
// matches regardless of whitespace drift.
class ScriptedProvider final : public Provider {
 public:
  using Script = std::map<std::string, std::vector<std::string>>;

  explicit ScriptedProvider(Script script, KeyMode mode = KeyMode::PromptDigest,
                            std::string provider_id = "scripted");

  // File format: JSON object mapping prompt keys to arrays of completion strings.
  static std::unique_ptr<ScriptedProvider> from_file(const std::filesystem::path& path,
                                                     KeyMode mode = KeyMode::PromptDigest);
  static std::unique_ptr<ScriptedProvider> from_json(const nlohmann::json& doc,
                                                     KeyMode mode = KeyMode::PromptDigest);

  CompletionResult complete(const CompletionRequest& request) override;
  std::string provider_id() const override { return provider_id_; }

  KeyMode key_mode() const noexcept { return mode_; }
  // Completions not yet consumed, summed over all keys.
  std::size_t remaining() const;

 private:
  std::string lookup_key(const std::string& prompt) const;

  struct Queue {
    std::vector<std::string> completions;
    std::size_t cursor = 0;
  };

  KeyMode mode_;
  std::string provider_id_;
  std::map<std::string, Queue> queues_;
  mutable std::mutex mu_;
};

struct HttpProviderOptions {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  std::string default_model;
  int max_retries = 3;  // total transport attempts
  int backoff_ms = 200;
  int timeout_ms = 30000;
};

// OpenAI-compatible completions client: POST {base_url}/completions.
class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpProviderOptions options);

  CompletionResult complete(const CompletionRequest& request) override;
  std::string provider_id() const override { return "live:" + options_.base_url; }

  const HttpProviderOptions& options() const noexcept { return options_; }

 private:
  HttpProviderOptions options_;
  std::string origin_;
  std::string path_prefix_;
};

// Decoding parameters applied to every prompt of one pipeline stage.
struct StageDecoding {
  double temperature = 0.7;
  int max_tokens = 256;
  std::vector<std::string> stop_sequences;
};

struct ProviderConfig {
  std::string kind;  // "scripted" | "live"
  // scripted
  std::filesystem::path script_path;
  KeyMode key_mode = KeyMode::PromptDigest;
  // live
  std::string base_url;
  std::string model_id;
  std::string api_key_env = "LLM_API_KEY";
  int max_retries = 3;
  int backoff_ms = 200;
  int timeout_ms = 30000;
  // per-stage overrides keyed by stage name ("step-generation", "node-extraction",
  // "relation-question", "grounding-inference")
  StageDecoding defaults;
  std::map<std::string, StageDecoding> stages;

  StageDecoding decoding_for(const std::string& stage) const;

  // Relative script paths resolve against `base_dir`. LLM_BASE_URL and LLM_MODEL_ID
  // fill in missing live fields.
  static ProviderConfig from_json(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir = {});
  static ProviderConfig from_file(const std::filesystem::path& path);
};

std::shared_ptr<Provider> resolve_provider(const ProviderConfig& config);

}  // namespace schemaloop::llm
