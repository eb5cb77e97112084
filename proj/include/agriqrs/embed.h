#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace agriqrs::embed {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

enum class EmbedderKind { kHashed, kFile, kService };

std::string to_string(EmbedderKind kind);
EmbedderKind parse_embedder_kind(const std::string& name);

inline constexpr std::size_t kDefaultDimension = 768;

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::kHashed;
  std::size_t dimension = kDefaultDimension;
  std::uint64_t seed = 7;   // hashed
  std::string path;         // file
  std::string endpoint;     // service, e.g. "http://127.0.0.1:8001"

  // Throws ConfigError when the fields the kind needs are missing.
  void validate() const;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  // One vector per text, in order. Provider failures throw and are fatal for
  // the whole batch.
  virtual std::vector<EmbeddingVector> embed_batch(
      std::span<const std::string> texts) const = 0;
};

// Feature-hashed bag of tokens: each token adds +-1 at a hashed index, then
// the sum is L2-normalized. Empty text maps to the zero vector.
EmbeddingVector hashed_embedding(std::string_view text, std::size_t dimension,
                                 std::uint64_t seed);

class HashedEmbedder final : public Embedder {
 public:
  HashedEmbedder(std::size_t dimension, std::uint64_t seed);
  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed_batch(
      std::span<const std::string> texts) const override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

// Precomputed vectors from JSON Lines: {"text": s, "embedding": [floats]}.
class FileEmbedder final : public Embedder {
 public:
  FileEmbedder(const std::string& path, std::size_t dimension);
  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed_batch(
      std::span<const std::string> texts) const override;

 private:
  std::size_t dimension_;
  std::unordered_map<std::string, EmbeddingVector> table_;
};

// Client for the embedding sidecar: POST {endpoint}/embed with
// {"texts": [...]} and expects {"dim": d, "embeddings": [[...]]}.
class ServiceEmbedder final : public Embedder {
 public:
  ServiceEmbedder(std::string endpoint, std::size_t dimension,
                  std::size_t max_batch = 32);
  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed_batch(
      std::span<const std::string> texts) const override;

 private:
  std::string endpoint_;
  std::size_t dimension_;
  std::size_t max_batch_;
};

// AGRIQRS_EMBED_ENDPOINT overrides spec.endpoint for the service kind.
std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                         const EmbedderSpec& spec);

double l2_norm(const EmbeddingVector& v);

// Scales to unit norm; zero vectors are returned unchanged.
void normalize(EmbeddingVector& v);

// dot(u,v)/(|u||v|), clamped to [-1, 1]. Zero vectors score 0.
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

}  // namespace agriqrs::embed
