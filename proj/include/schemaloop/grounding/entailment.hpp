#pragma once

#include <string>

namespace schemaloop::grounding {

// score(premise, hypothesis) in [0, 1]; deterministic for fixed inputs.
class EntailmentScorer {
 public:
  virtual ~EntailmentScorer() = default;
  virtual double score(const std::string& premise, const std::string& hypothesis) const = 0;
};

// Offline scorer: share of the hypothesis' content tokens that also occur in the premise.
class LexicalEntailmentScorer final : public EntailmentScorer {
 public:
  double score(const std::string& premise, const std::string& hypothesis) const override;
};

// Client for an NLI service: POST {"premise", "hypothesis"} -> {"entailment": x}.
class HttpEntailmentScorer final : public EntailmentScorer {
 public:
  explicit HttpEntailmentScorer(std::string url, int timeout_ms = 10000);
  // Throws ScorerError on transport failure, non-2xx status or a malformed body.
  double score(const std::string& premise, const std::string& hypothesis) const override;

 private:
  std::string origin_;
  std::string path_;
  int timeout_ms_;
};

bool is_stopword(const std::string& token);

}  // namespace schemaloop::grounding
