#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace schemaloop::grounding {

using Vector = std::vector<double>;

// Token vectors in GloVe text format. Immutable after load.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  // Throws MalformedEmbeddingFile when dimension is 0 or a vector's length differs.
  EmbeddingStore(std::size_t dimension, std::unordered_map<std::string, Vector> vectors);

  // One "token v1 ... vD" entry per line; D comes from the first line.
  // Blank lines are ignored. Throws MalformedEmbeddingFile.
  static EmbeddingStore from_stream(std::istream& in);
  static EmbeddingStore from_file(const std::filesystem::path& path);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  const Vector* find(std::string_view token) const;

 private:
  std::size_t dimension_ = 0;
  std::unordered_map<std::string, Vector> vectors_;
};

// Mean of the in-vocabulary token vectors of the phrase (tokens case-folded and
// stripped of surrounding punctuation); nullopt when no token is known.
std::optional<Vector> embed_phrase(const EmbeddingStore& store, std::string_view phrase);

// Cosine similarity clamped to [-1, 1]; 0 when either vector has zero norm.
double cosine(const Vector& a, const Vector& b);

}  // namespace schemaloop::grounding
