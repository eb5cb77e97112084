#include "agriqrs/embed.h"

#include <gtest/gtest.h>
#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "agriqrs/errors.h"
#include "agriqrs/rng.h"

namespace agriqrs::embed {
namespace {

TEST(HashedEmbeddingTest, Deterministic) {
  const std::vector<std::string> texts{"fungal attack"};
  const auto a = embed_batch(texts, EmbedderSpec{});
  const auto b = embed_batch(texts, EmbedderSpec{});
  EXPECT_EQ(a, b);
}

TEST(HashedEmbeddingTest, UnitNorm) {
  for (const char* t : {"fungal attack", "a b c d e f g", "x", "rust rust rust"})
    EXPECT_NEAR(l2_norm(hashed_embedding(t, 768, 7)), 1.0, 1e-6) << t;
}

TEST(HashedEmbeddingTest, OrderInvariant) {
  EXPECT_EQ(hashed_embedding("fungal attack", 768, 7),
            hashed_embedding("attack fungal", 768, 7));
}

TEST(HashedEmbeddingTest, EmptyTextIsZero) {
  const auto v = hashed_embedding("", 768, 7);
  ASSERT_EQ(v.dimension(), 768u);
  for (double x : v.values) EXPECT_EQ(x, 0.0);
}

TEST(HashedEmbeddingTest, SingleTokenIsSignedOneHot) {
  const auto v = hashed_embedding("bollworm", 64, 7);
  int nonzero = 0;
  for (double x : v.values) {
    if (x != 0.0) {
      ++nonzero;
      EXPECT_EQ(std::abs(x), 1.0);
    }
  }
  EXPECT_EQ(nonzero, 1);
}

TEST(HashedEmbeddingTest, SeedChangesVector) {
  EXPECT_NE(hashed_embedding("fungal attack in crop", 768, 7),
            hashed_embedding("fungal attack in crop", 768, 8));
}

TEST(HashedEmbeddingTest, SharedTokensRaiseCosineOnAverage) {
  Rng rng(2024);
  auto word = [&] { return "w" + std::to_string(rng.below(100000)); };
  double shared = 0.0, disjoint = 0.0;
  constexpr int kTrials = 1000;
  for (int t = 0; t < kTrials; ++t) {
    std::string common, a, b, c;
    for (int i = 0; i < 3; ++i) common += word() + " ";
    for (int i = 0; i < 3; ++i) a += word() + " ";
    for (int i = 0; i < 3; ++i) b += word() + " ";
    for (int i = 0; i < 6; ++i) c += word() + " ";
    const auto u = hashed_embedding(common + a, 768, 7);
    shared += cosine_similarity(u, hashed_embedding(common + b, 768, 7));
    disjoint += cosine_similarity(u, hashed_embedding(c, 768, 7));
  }
  EXPECT_GT(shared / kTrials, disjoint / kTrials);
}

TEST(CosineTest, HandValues) {
  const EmbeddingVector u{{1.0, 0.0, 0.0}}, v{{0.0, 1.0, 0.0}};
  EXPECT_DOUBLE_EQ(cosine_similarity(u, u), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(u, v), 0.0);
  EXPECT_NEAR(cosine_similarity({{1.0, 1.0}}, {{1.0, 0.0}}), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(cosine_similarity({{1.0, 1.0}}, {{1.0, 0.0}}), 0.70711, 1e-5);
}

TEST(CosineTest, ZeroVectorScoresZero) {
  EXPECT_EQ(cosine_similarity({{0.0, 0.0}}, {{1.0, 0.0}}), 0.0);
  EXPECT_EQ(cosine_similarity({{0.0, 0.0}}, {{0.0, 0.0}}), 0.0);
}

TEST(CosineTest, SymmetricScaleInvariantAndInRange) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    EmbeddingVector u, v;
    for (int i = 0; i < 16; ++i) {
      u.values.push_back(rng.normal());
      v.values.push_back(rng.normal());
    }
    const double c = cosine_similarity(u, v);
    EXPECT_EQ(c, cosine_similarity(v, u));
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EmbeddingVector scaled = u;
    for (double& x : scaled.values) x *= 3.7;
    EXPECT_NEAR(cosine_similarity(scaled, v), c, 1e-9);
  }
}

TEST(CosineTest, DimensionMismatchThrows) {
  EXPECT_THROW(cosine_similarity({{1.0}}, {{1.0, 0.0}}), ContractError);
}

TEST(EmbedderSpecTest, RequiredFieldsPerKind) {
  EmbedderSpec file;
  file.kind = EmbedderKind::kFile;
  EXPECT_THROW(file.validate(), ConfigError);
  EmbedderSpec service;
  service.kind = EmbedderKind::kService;
  EXPECT_THROW(service.validate(), ConfigError);
  EmbedderSpec zero;
  zero.dimension = 0;
  EXPECT_THROW(zero.validate(), ConfigError);
  EXPECT_NO_THROW(EmbedderSpec{}.validate());
  EXPECT_EQ(parse_embedder_kind("service"), EmbedderKind::kService);
  EXPECT_THROW(parse_embedder_kind("sbert"), ConfigError);
}

class FileEmbedderTest : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = std::filesystem::temp_directory_path() / "agriqrs_vectors.jsonl";
    std::ofstream out(path_);
    out << R"({"text": "fungal attack", "embedding": [3, 4, 0]})" << "\n\n"
        << R"({"text": "thrips", "embedding": [0, 0, 2]})" << "\n";
  }
  void TearDown() override { std::filesystem::remove(path_); }
  std::filesystem::path path_;
};

TEST_F(FileEmbedderTest, ReturnsNormalizedStoredVectors) {
  FileEmbedder e(path_.string(), 3);
  const std::vector<std::string> texts{"thrips", "fungal attack"};
  const auto v = e.embed_batch(texts);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].values, (std::vector<double>{0.0, 0.0, 1.0}));
  EXPECT_NEAR(v[1].values[0], 0.6, 1e-12);
  EXPECT_NEAR(v[1].values[1], 0.8, 1e-12);
}

TEST_F(FileEmbedderTest, MissingTextIsLookupError) {
  FileEmbedder e(path_.string(), 3);
  const std::vector<std::string> texts{"unknown"};
  try {
    e.embed_batch(texts);
    FAIL();
  } catch (const LookupError& err) {
    EXPECT_NE(std::string(err.what()).find("unknown"), std::string::npos);
  }
}

TEST_F(FileEmbedderTest, WrongDimensionRejected) {
  EXPECT_THROW(FileEmbedder(path_.string(), 4), ProviderError);
}

// In-process stand-in for the embedding sidecar.
class MockSidecar {
 public:
  explicit MockSidecar(std::size_t dim) : dim_(dim) {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      const auto body = nlohmann::json::parse(req.body);
      const auto texts = body.at("texts").get<std::vector<std::string>>();
      if (texts.empty() || texts.size() > 32) {
        res.status = 400;
        return;
      }
      nlohmann::json reply;
      reply["dim"] = reported_dim_ ? reported_dim_ : dim_;
      reply["embeddings"] = nlohmann::json::array();
      for (const auto& t : texts) {
        std::vector<double> v(dim_, 0.0);
        for (std::size_t i = 0; i < t.size(); ++i) v[(i * 31 + t[i]) % dim_] += 2.0;
        reply["embeddings"].push_back(v);
      }
      if (drop_one_) reply["embeddings"].erase(0);
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockSidecar() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::size_t dim_;
  std::size_t reported_dim_ = 0;
  bool drop_one_ = false;
  int requests_ = 0;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(ServiceEmbedderTest, OrderPreservingNormalizedBatches) {
  MockSidecar sidecar(8);
  ServiceEmbedder e(sidecar.endpoint(), 8, 2);
  std::vector<std::string> texts{"a", "bb", "ccc", "dddd", "a"};
  const auto v = e.embed_batch(texts);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(sidecar.requests_, 3);
  EXPECT_EQ(v[0], v[4]);
  EXPECT_NE(v[0], v[1]);
  for (const auto& x : v) EXPECT_NEAR(l2_norm(x), 1.0, 1e-12);
}

TEST(ServiceEmbedderTest, DimensionMismatchIsProviderError) {
  MockSidecar sidecar(8);
  sidecar.reported_dim_ = 16;
  ServiceEmbedder e(sidecar.endpoint(), 8);
  const std::vector<std::string> texts{"a"};
  EXPECT_THROW(e.embed_batch(texts), ProviderError);
  ServiceEmbedder wrong(sidecar.endpoint(), 16);
  EXPECT_THROW(wrong.embed_batch(texts), ProviderError);
}

TEST(ServiceEmbedderTest, CountMismatchIsProviderError) {
  MockSidecar sidecar(8);
  sidecar.drop_one_ = true;
  ServiceEmbedder e(sidecar.endpoint(), 8);
  const std::vector<std::string> texts{"a", "b"};
  EXPECT_THROW(e.embed_batch(texts), ProviderError);
}

TEST(ServiceEmbedderTest, UnreachableIsProviderError) {
  // Nothing listens on port 1.
  ServiceEmbedder e("http://127.0.0.1:1", 8);
  const std::vector<std::string> texts{"a"};
  EXPECT_THROW(e.embed_batch(texts), ProviderError);
}

TEST(ServiceEmbedderTest, EnvironmentOverridesEndpoint) {
  MockSidecar sidecar(8);
  EmbedderSpec spec;
  spec.kind = EmbedderKind::kService;
  spec.dimension = 8;
  spec.endpoint = "http://127.0.0.1:1";
  ::setenv("AGRIQRS_EMBED_ENDPOINT", sidecar.endpoint().c_str(), 1);
  const auto e = make_embedder(spec);
  ::unsetenv("AGRIQRS_EMBED_ENDPOINT");
  const std::vector<std::string> texts{"fungal attack"};
  EXPECT_EQ(e->embed_batch(texts).size(), 1u);
}

}  // namespace
}  // namespace agriqrs::embed
