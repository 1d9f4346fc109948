#include "schemaloop/llm/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>
#include <tuple>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "schemaloop/error.hpp"
#include "schemaloop/util/text.hpp"

namespace schemaloop::llm {

using nlohmann::json;

void validate(const CompletionRequest& request) {
  if (request.prompt.empty()) throw InvalidRequest("prompt must be non-empty");
  if (request.max_tokens < 1) throw InvalidRequest("max_tokens must be >= 1");
  if (request.temperature < 0.0 || request.temperature > 2.0)
    throw InvalidRequest("temperature must be within [0, 2]");
}

std::string strip_stop_sequences(const std::string& text, const std::vector<std::string>& stops) {
  std::size_t cut = text.size();
  for (const auto& stop : stops) {
    if (stop.empty()) continue;
    auto pos = text.find(stop);
    if (pos != std::string::npos && pos < cut) cut = pos;
  }
  return text.substr(0, cut);
}

std::string normalize_prompt(const std::string& prompt) { return text::collapse_whitespace(prompt); }

std::string prompt_digest_key(const std::string& prompt) {
  return "digest:" + text::fnv1a_hex(normalize_prompt(prompt));
}

// ---------------------------------------------------------------------------
// ScriptedProvider

ScriptedProvider::ScriptedProvider(Script script, KeyMode mode, std::string provider_id)
    : mode_(mode), provider_id_(std::move(provider_id)) {
  for (auto& [key, completions] : script) {
    std::string k = key;
    if (mode_ == KeyMode::PromptDigest && key.rfind("digest:", 0) != 0) k = prompt_digest_key(key);
    auto& q = queues_[k].completions;
    q.insert(q.end(), completions.begin(), completions.end());
  }
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_json(const json& doc, KeyMode mode) {
  if (!doc.is_object()) throw MalformedScriptFile("script must be a JSON object");
  Script script;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_array()) throw MalformedScriptFile("script entry '" + key + "' must be an array");
    auto& list = script[key];
    for (const auto& item : value) {
      if (!item.is_string())
        throw MalformedScriptFile("script entry '" + key + "' must contain only strings");
      list.push_back(item.get<std::string>());
    }
  }
  return std::make_unique<ScriptedProvider>(std::move(script), mode);
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::filesystem::path& path,
                                                              KeyMode mode) {
  std::ifstream in(path);
  if (!in) throw MalformedScriptFile("cannot open script file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw MalformedScriptFile("script file " + path.string() + ": " + e.what());
  }
  return from_json(doc, mode);
}

std::string ScriptedProvider::lookup_key(const std::string& prompt) const {
  return mode_ == KeyMode::ExactPrompt ? prompt : prompt_digest_key(prompt);
}

CompletionResult ScriptedProvider::complete(const CompletionRequest& request) {
  validate(request);
  std::string raw;
  {
    std::lock_guard lock(mu_);
    auto it = queues_.find(lookup_key(request.prompt));
    if (it == queues_.end() || it->second.cursor >= it->second.completions.size())
      throw ProviderError("no scripted completion");
    raw = it->second.completions[it->second.cursor++];
  }
  return CompletionResult{strip_stop_sequences(raw, request.stop_sequences), provider_id_, 0};
}

std::size_t ScriptedProvider::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, q] : queues_) n += q.completions.size() - q.cursor;
  return n;
}

// ---------------------------------------------------------------------------
// HttpProvider

HttpProvider::HttpProvider(HttpProviderOptions options) : options_(std::move(options)) {
  if (options_.api_key.empty()) throw MissingCredential("LLM API key is not set");
  if (options_.base_url.empty()) throw ConfigError("live provider requires a base URL");
  std::tie(origin_, path_prefix_) = text::split_url(options_.base_url);
  if (options_.max_retries < 1) options_.max_retries = 1;
}

CompletionResult HttpProvider::complete(const CompletionRequest& request) {
  validate(request);
  json body = {{"prompt", request.prompt},
               {"model", request.model_id.empty() ? options_.default_model : request.model_id},
               {"max_tokens", request.max_tokens},
               {"temperature", request.temperature}};
  if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
  const std::string payload = body.dump();
  const std::string path = path_prefix_ + "/completions";

  httplib::Client client(origin_);
  auto timeout = std::chrono::milliseconds(options_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers{{"Authorization", "Bearer " + options_.api_key}};

  std::string last_error;
  for (int attempt = 1; attempt <= options_.max_retries; ++attempt) {
    auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, payload, "application/json");
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    if (!res) {
      last_error = httplib::to_string(res.error());
      spdlog::warn("completion transport failure (attempt {}/{}): {}", attempt,
                   options_.max_retries, last_error);
      if (attempt < options_.max_retries)
        std::this_thread::sleep_for(std::chrono::milliseconds(options_.backoff_ms << (attempt - 1)));
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      std::string message = res->body;
      try {
        auto err = json::parse(res->body);
        if (err.contains("error") && err["error"].is_object())
          message = err["error"].value("message", message);
      } catch (const json::exception&) {
      }
      throw ProviderError("provider returned HTTP " + std::to_string(res->status) + ": " + message);
    }
    try {
      auto doc = json::parse(res->body);
      const auto& choice = doc.at("choices").at(0);
      std::string text = choice.at("text").get<std::string>();
      return CompletionResult{strip_stop_sequences(text, request.stop_sequences), provider_id(),
                              latency};
    } catch (const json::exception& e) {
      throw ProviderError(std::string("malformed completion payload: ") + e.what());
    }
  }
  throw TransportError("completion request failed after " + std::to_string(options_.max_retries) +
                           " attempts: " + last_error,
                       static_cast<std::size_t>(options_.max_retries));
}

// ---------------------------------------------------------------------------
// Config

namespace {

StageDecoding parse_decoding(const json& j, StageDecoding base) {
  base.temperature = j.value("temperature", base.temperature);
  base.max_tokens = j.value("max_tokens", base.max_tokens);
  if (j.contains("stop")) base.stop_sequences = j.at("stop").get<std::vector<std::string>>();
  return base;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

StageDecoding ProviderConfig::decoding_for(const std::string& stage) const {
  auto it = stages.find(stage);
  return it == stages.end() ? defaults : it->second;
}

ProviderConfig ProviderConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("provider config must be a JSON object");
  ProviderConfig cfg;
  try {
    cfg.kind = doc.at("kind").get<std::string>();
    if (doc.contains("path")) {
      std::filesystem::path p = doc.at("path").get<std::string>();
      cfg.script_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    auto mode = doc.value("key_mode", std::string("prompt-digest"));
    if (mode == "exact-prompt")
      cfg.key_mode = KeyMode::ExactPrompt;
    else if (mode == "prompt-digest")
      cfg.key_mode = KeyMode::PromptDigest;
    else
      throw ConfigError("unknown key_mode '" + mode + "'");
    cfg.base_url = doc.value("base_url", env_or("LLM_BASE_URL", ""));
    cfg.model_id = doc.value("model_id", env_or("LLM_MODEL_ID", ""));
    cfg.api_key_env = doc.value("api_key_env", cfg.api_key_env);
    cfg.max_retries = doc.value("max_retries", cfg.max_retries);
    cfg.backoff_ms = doc.value("backoff_ms", cfg.backoff_ms);
    cfg.timeout_ms = doc.value("timeout_ms", cfg.timeout_ms);
    cfg.defaults = parse_decoding(doc, cfg.defaults);
    if (doc.contains("stages")) {
      for (const auto& [stage, overrides] : doc.at("stages").items())
        cfg.stages[stage] = parse_decoding(overrides, cfg.defaults);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("provider config: ") + e.what());
  }
  return cfg;
}

ProviderConfig ProviderConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open provider config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("provider config " + path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

std::shared_ptr<Provider> resolve_provider(const ProviderConfig& config) {
  if (config.kind == "scripted") {
    if (config.script_path.empty()) throw MalformedScriptFile("scripted provider needs a path");
    return ScriptedProvider::from_file(config.script_path, config.key_mode);
  }
  if (config.kind == "live") {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (!key || !*key) throw MissingCredential("environment variable " + config.api_key_env + " is not set");
    HttpProviderOptions opts;
    opts.base_url = config.base_url.empty() ? std::string("https://api.openai.com/v1") : config.base_url;
    opts.api_key = key;
    opts.default_model = config.model_id;
    opts.max_retries = config.max_retries;
    opts.backoff_ms = config.backoff_ms;
    opts.timeout_ms = config.timeout_ms;
    return std::make_shared<HttpProvider>(std::move(opts));
  }
  throw UnknownProviderKind("unknown provider kind '" + config.kind + "'");
}

}  // namespace schemaloop::llm
