#include "schemaloop/grounding/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "schemaloop/error.hpp"
#include "schemaloop/util/text.hpp"

namespace schemaloop::grounding {

EmbeddingStore::EmbeddingStore(std::size_t dimension, std::unordered_map<std::string, Vector> vectors)
    : dimension_(dimension) {
  if (dimension == 0) throw MalformedEmbeddingFile("embedding dimension must be positive");
  for (auto& [token, v] : vectors) {
    if (v.size() != dimension)
      throw MalformedEmbeddingFile("vector for '" + token + "' has " + std::to_string(v.size()) +
                                   " components, expected " + std::to_string(dimension));
    vectors_[text::to_lower(token)] = std::move(v);
  }
}

EmbeddingStore EmbeddingStore::from_stream(std::istream& in) {
  std::unordered_map<std::string, Vector> vectors;
  std::size_t dimension = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = text::split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) throw MalformedEmbeddingFile("line " + std::to_string(line_no) + ": no vector");
    const std::size_t d = fields.size() - 1;
    if (dimension == 0) dimension = d;
    if (d != dimension)
      throw MalformedEmbeddingFile("line " + std::to_string(line_no) + ": expected " + std::to_string(dimension) +
                                   " components, got " + std::to_string(d));
    Vector v(d);
    for (std::size_t i = 0; i < d; ++i) {
      const auto& field = fields[i + 1];
      std::size_t used = 0;
      try {
        v[i] = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != field.size() || !std::isfinite(v[i]))
        throw MalformedEmbeddingFile("line " + std::to_string(line_no) + ": bad number '" + field + "'");
    }
    vectors[text::to_lower(fields[0])] = std::move(v);
  }
  if (dimension == 0) throw MalformedEmbeddingFile("embedding file is empty");
  return EmbeddingStore(dimension, std::move(vectors));
}

EmbeddingStore EmbeddingStore::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedEmbeddingFile("cannot open embedding file " + path.string());
  return from_stream(in);
}

const Vector* EmbeddingStore::find(std::string_view token) const {
  auto it = vectors_.find(std::string(token));
  return it == vectors_.end() ? nullptr : &it->second;
}

std::optional<Vector> embed_phrase(const EmbeddingStore& store, std::string_view phrase) {
  Vector sum(store.dimension(), 0.0);
  std::size_t known = 0;
  for (const auto& token : text::word_tokens(phrase)) {
    const Vector* v = store.find(token);
    if (!v) continue;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
    ++known;
  }
  if (known == 0) return std::nullopt;
  for (auto& x : sum) x /= static_cast<double>(known);
  return sum;
}

double cosine(const Vector& a, const Vector& b) {
  double dot = 0, na = 0, nb = 0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace schemaloop::grounding
