#include "agriqrs/embed.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "agriqrs/errors.h"
#include "agriqrs/rng.h"
#include "agriqrs/text.h"
#include "httplib.h"
#include "json.hpp"

namespace agriqrs::embed {

using nlohmann::json;

std::string to_string(EmbedderKind kind) {
  switch (kind) {
    case EmbedderKind::kHashed:
      return "hashed";
    case EmbedderKind::kFile:
      return "file";
    case EmbedderKind::kService:
      return "service";
  }
  return "unknown";
}

EmbedderKind parse_embedder_kind(const std::string& name) {
  if (name == "hashed") return EmbedderKind::kHashed;
  if (name == "file") return EmbedderKind::kFile;
  if (name == "service") return EmbedderKind::kService;
  throw ConfigError("unknown embedder kind '" + name +
                    "' (expected hashed, file or service)");
}

void EmbedderSpec::validate() const {
  if (dimension < 1) throw ConfigError("embedder dimension must be >= 1");
  if (kind == EmbedderKind::kFile && path.empty()) {
    throw ConfigError("file embedder requires a path");
  }
  if (kind == EmbedderKind::kService && endpoint.empty() &&
      !std::getenv("AGRIQRS_EMBED_ENDPOINT")) {
    throw ConfigError("service embedder requires an endpoint");
  }
}

double l2_norm(const EmbeddingVector& v) {
  double sum = 0.0;
  for (double x : v.values) sum += x * x;
  return std::sqrt(sum);
}

void normalize(EmbeddingVector& v) {
  const double norm = l2_norm(v);
  if (norm == 0.0) return;
  for (double& x : v.values) x /= norm;
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dimension() != v.dimension()) {
    throw ContractError("cosine_similarity: dimension mismatch (" +
                        std::to_string(u.dimension()) + " vs " +
                        std::to_string(v.dimension()) + ")");
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    dot += u.values[i] * v.values[i];
    uu += u.values[i] * u.values[i];
    vv += v.values[i] * v.values[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------

EmbeddingVector hashed_embedding(std::string_view text, std::size_t dimension,
                                 std::uint64_t seed) {
  if (dimension < 1) throw ContractError("hashed_embedding: dimension < 1");
  EmbeddingVector v;
  v.values.assign(dimension, 0.0);
  const std::uint64_t seed_mix = mix64(seed);
  for (const auto& token : text::tokenize(text)) {
    const std::uint64_t h = mix64(fnv1a64(token) ^ seed_mix);
    const std::size_t index = static_cast<std::size_t>((h >> 1) % dimension);
    v.values[index] += (h & 1) ? 1.0 : -1.0;
  }
  normalize(v);
  return v;
}

HashedEmbedder::HashedEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension < 1) throw ConfigError("embedder dimension must be >= 1");
}

std::vector<EmbeddingVector> HashedEmbedder::embed_batch(
    std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hashed_embedding(t, dimension_, seed_));
  return out;
}

// ---------------------------------------------------------------------------

FileEmbedder::FileEmbedder(const std::string& path, std::size_t dimension)
    : dimension_(dimension) {
  std::ifstream in(path);
  if (!in) throw ProviderError("cannot open embedding file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::collapse_whitespace(line).empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw ProviderError(path + ":" + std::to_string(line_no) +
                          ": invalid JSON: " + e.what());
    }
    if (!row.contains("text") || !row.contains("embedding") ||
        !row["text"].is_string() || !row["embedding"].is_array()) {
      throw ProviderError(path + ":" + std::to_string(line_no) +
                          ": expected {\"text\", \"embedding\"}");
    }
    EmbeddingVector v;
    try {
      v.values = row["embedding"].get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ProviderError(path + ":" + std::to_string(line_no) +
                          ": embedding entries must be numbers");
    }
    if (v.dimension() != dimension_) {
      throw ProviderError(path + ":" + std::to_string(line_no) +
                          ": embedding has dimension " +
                          std::to_string(v.dimension()) + ", expected " +
                          std::to_string(dimension_));
    }
    normalize(v);
    table_.insert_or_assign(row["text"].get<std::string>(), std::move(v));
  }
}

std::vector<EmbeddingVector> FileEmbedder::embed_batch(
    std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto it = table_.find(t);
    if (it == table_.end()) {
      throw LookupError("no stored embedding for text \"" + t + "\"");
    }
    out.push_back(it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Splits "http://host:port/base" into the client origin and a path prefix.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  const auto path_start =
      endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  std::string base = endpoint.substr(path_start);
  while (!base.empty() && base.back() == '/') base.pop_back();
  return {endpoint.substr(0, path_start), base};
}

}  // namespace

ServiceEmbedder::ServiceEmbedder(std::string endpoint, std::size_t dimension,
                                 std::size_t max_batch)
    : endpoint_(std::move(endpoint)),
      dimension_(dimension),
      max_batch_(std::max<std::size_t>(1, max_batch)) {}

std::vector<EmbeddingVector> ServiceEmbedder::embed_batch(
    std::span<const std::string> texts) const {
  const auto [origin, base] = split_endpoint(endpoint_);
  httplib::Client client(origin);
  client.set_connection_timeout(5);
  client.set_read_timeout(120);

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += max_batch_) {
    const auto count = std::min(max_batch_, texts.size() - start);
    json body;
    body["texts"] = std::vector<std::string>(texts.begin() + start,
                                             texts.begin() + start + count);
    auto res = client.Post(base + "/embed", body.dump(), "application/json");
    if (!res) {
      throw ProviderError("embedding service unreachable at " + endpoint_ +
                          ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw ProviderError("embedding service returned HTTP " +
                          std::to_string(res->status) + ": " + res->body);
    }
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      throw ProviderError(std::string("embedding service sent invalid JSON: ") +
                          e.what());
    }
    if (!reply.is_object() || !reply.contains("dim") ||
        !reply["dim"].is_number_unsigned() || !reply.contains("embeddings") ||
        !reply["embeddings"].is_array()) {
      throw ProviderError("embedding service reply lacks dim/embeddings");
    }
    const auto dim = reply["dim"].get<std::size_t>();
    if (dim != dimension_) {
      throw ProviderError("embedding service dimension " + std::to_string(dim) +
                          " does not match configured " +
                          std::to_string(dimension_));
    }
    if (reply["embeddings"].size() != count) {
      throw ProviderError("embedding service returned " +
                          std::to_string(reply["embeddings"].size()) +
                          " vectors for " + std::to_string(count) + " texts");
    }
    for (const auto& row : reply["embeddings"]) {
      EmbeddingVector v;
      if (!row.is_array()) {
        throw ProviderError("embedding service row is not an array");
      }
      for (const auto& x : row) {
        if (!x.is_number()) {
          throw ProviderError("embedding service row has a non-numeric entry");
        }
        v.values.push_back(x.get<double>());
      }
      if (v.dimension() != dimension_) {
        throw ProviderError("embedding service vector of dimension " +
                            std::to_string(v.dimension()));
      }
      for (double x : v.values) {
        if (!std::isfinite(x)) {
          throw ProviderError("embedding service returned non-finite value");
        }
      }
      normalize(v);
      out.push_back(std::move(v));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case EmbedderKind::kHashed:
      return std::make_unique<HashedEmbedder>(spec.dimension, spec.seed);
    case EmbedderKind::kFile:
      return std::make_unique<FileEmbedder>(spec.path, spec.dimension);
    case EmbedderKind::kService: {
      std::string endpoint = spec.endpoint;
      if (const char* env = std::getenv("AGRIQRS_EMBED_ENDPOINT"); env && *env) {
        endpoint = env;
      }
      return std::make_unique<ServiceEmbedder>(endpoint, spec.dimension);
    }
  }
  throw ConfigError("unknown embedder kind");
}

std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                         const EmbedderSpec& spec) {
  return make_embedder(spec)->embed_batch(texts);
}

}  // namespace agriqrs::embed
