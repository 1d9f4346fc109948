#include "schemaloop/grounding/entailment.hpp"

#include <chrono>
#include <set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "schemaloop/error.hpp"
#include "schemaloop/util/text.hpp"

namespace schemaloop::grounding {

using nlohmann::json;

bool is_stopword(const std::string& token) {
  static const std::set<std::string> kStopwords = {
      "a",    "an",   "the",  "of",   "to",   "in",   "on",   "at",   "by",    "for",  "with",
      "from", "and",  "or",   "is",   "are",  "was",  "were", "be",   "been",  "being", "it",
      "its",  "this", "that", "as",   "into", "onto", "his",  "her",  "their", "them", "he",
      "she",  "they", "has",  "have", "had",  "do",   "does", "did",  "about", "over", "up"};
  return kStopwords.count(token) > 0;
}

namespace {
std::set<std::string> content_tokens(const std::string& s) {
  std::set<std::string> out;
  for (auto& t : text::word_tokens(s))
    if (!t.empty() && !is_stopword(t)) out.insert(std::move(t));
  return out;
}
}  // namespace

double LexicalEntailmentScorer::score(const std::string& premise, const std::string& hypothesis) const {
  const auto hyp = content_tokens(hypothesis);
  if (hyp.empty()) return 0.0;
  const auto pre = content_tokens(premise);
  std::size_t overlap = 0;
  for (const auto& t : hyp) overlap += pre.count(t);
  return static_cast<double>(overlap) / static_cast<double>(hyp.size());
}

HttpEntailmentScorer::HttpEntailmentScorer(std::string url, int timeout_ms) : timeout_ms_(timeout_ms) {
  if (url.empty()) throw ConfigError("entailment service URL is empty");
  std::tie(origin_, path_) = text::split_url(url);
  if (path_.empty()) path_ = "/";
}

double HttpEntailmentScorer::score(const std::string& premise, const std::string& hypothesis) const {
  httplib::Client client(origin_);
  auto timeout = std::chrono::milliseconds(timeout_ms_);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  const json body = {{"premise", premise}, {"hypothesis", hypothesis}};
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) throw ScorerError("entailment service unreachable: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw ScorerError("entailment service returned HTTP " + std::to_string(res->status));
  double value = 0;
  try {
    value = json::parse(res->body).at("entailment").get<double>();
  } catch (const json::exception& e) {
    throw ScorerError(std::string("malformed entailment response: ") + e.what());
  }
  if (!(value >= 0.0 && value <= 1.0)) throw ScorerError("entailment score outside [0, 1]");
  return value;
}

}  // namespace schemaloop::grounding
