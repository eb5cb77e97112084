#include "agriqrs/server.h"

#include <gtest/gtest.h>

#include <httplib.h>
#include <json.hpp>

#include <thread>

#include "agriqrs/errors.h"
#include "agriqrs/pipeline.h"

namespace agriqrs::server {
namespace {

const std::string kTable1 = std::string(AGRIQRS_FIXTURES) + "/table1.csv";
const std::string kCrops = std::string(AGRIQRS_DATA) + "/crops.txt";

pipeline::PipelineConfig small_config() {
  pipeline::PipelineConfig c;
  c.cluster.min_size = 1;
  c.train.hidden1 = 32;
  c.train.hidden2 = 16;
  c.train.learning_rate = 0.01;
  c.train.epochs = 100;
  return c;
}

const retrieval::FittedIndex& table1_index() {
  static const auto index =
      pipeline::make_index(pipeline::fit(kTable1, kCrops, small_config()));
  return index;
}

nlohmann::json body_of(const Response& r) { return nlohmann::json::parse(r.body); }

TEST(HandleQueryTest, AnswersLikeRetrieval) {
  const auto& index = table1_index();
  const auto r = handle_query(index, R"({"text": "How to control fungal attack in garlic", "k": 2})");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body, retrieval::to_json(retrieval::top_k_answers(
                        "How to control fungal attack in garlic", 2, index)));
  EXPECT_EQ(body_of(r)["answers"][0]["answer"], "Spray to mencozeb carbendazim 35-40 grampump");
}

TEST(HandleQueryTest, DefaultK) {
  const auto r = handle_query(table1_index(), R"({"text": "varieties of chilli"})");
  EXPECT_EQ(r.status, 200);
  EXPECT_LE(body_of(r)["answers"].size(), 5u);
}

TEST(HandleQueryTest, BadRequests) {
  const auto& index = table1_index();
  for (const char* body : {"not json", "{}", R"({"text": 3})", R"({"text": "x", "k": 0})",
                           R"({"text": "x", "k": "two"})", "[]"}) {
    const auto r = handle_query(index, body);
    EXPECT_EQ(r.status, 400) << body;
    EXPECT_EQ(body_of(r)["error"], "bad_request") << body;
  }
}

TEST(HandleQueryTest, RejectedQueries) {
  const auto& index = table1_index();
  auto r = handle_query(index, R"({"text": "today market price of onion"})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(body_of(r)["error"], "unsupported_query");
  r = handle_query(index, R"({"text": "  "})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(body_of(r)["error"], "query_error");
}

TEST(HandleHealthTest, ReportsClusters) {
  const auto r = handle_health(table1_index());
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(body_of(r), nlohmann::json::parse(R"({"status":"ok","clusters":5})"));
}

TEST(ParseBindTest, Forms) {
  EXPECT_EQ(parse_bind("0.0.0.0:8080"), (std::pair<std::string, int>{"0.0.0.0", 8080}));
  EXPECT_EQ(parse_bind("9000"), (std::pair<std::string, int>{"127.0.0.1", 9000}));
  EXPECT_THROW(parse_bind("host:"), ConfigError);
  EXPECT_THROW(parse_bind("host:70000"), ConfigError);
  EXPECT_THROW(parse_bind("abc"), ConfigError);
}

TEST(QueryServerTest, ServesOverHttp) {
  auto index = std::make_shared<const retrieval::FittedIndex>(table1_index());
  QueryServer server(index);
  const int port = server.bind("127.0.0.1", 0);
  std::thread t([&] { server.run(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  const std::string q = R"({"text": "Control of pink bollworm of cotton", "k": 3})";
  auto res = client.Post("/query", q, "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, handle_query(*index, q).body);
  EXPECT_NE(res->get_header_value("Content-Type").find("application/json"), std::string::npos);

  res = client.Post("/query", "{", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  res = client.Post("/query", R"({"text": "weather forecast for wheat"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);

  server.stop();
  t.join();
}

// Stand-in for the embedding sidecar: deterministic vectors from character
// positions.
class MockSidecar {
 public:
  explicit MockSidecar(std::size_t dim) : dim_(dim) {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      const auto texts = nlohmann::json::parse(req.body).at("texts").get<std::vector<std::string>>();
      nlohmann::json reply{{"dim", dim_}, {"embeddings", nlohmann::json::array()}};
      for (const auto& t : texts) {
        std::vector<double> v(dim_, 0.0);
        for (std::size_t i = 0; i < t.size(); ++i)
          v[(static_cast<unsigned char>(t[i]) * 7 + i) % dim_] += 1.0;
        reply["embeddings"].push_back(v);
      }
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
  int requests_ = 0;

 private:
  std::size_t dim_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(ServiceEmbedderFitTest, Table1ThroughSidecar) {
  MockSidecar sidecar(32);
  auto config = small_config();
  config.embedder.kind = embed::EmbedderKind::kService;
  config.embedder.endpoint = sidecar.endpoint();
  config.embedder.dimension = 32;
  const auto artifact = pipeline::fit(kTable1, kCrops, config);
  EXPECT_GE(sidecar.requests_, 1);
  EXPECT_EQ(artifact.model.dims.input, 32u);
  EXPECT_EQ(artifact.config.to_json()["embedder"]["kind"], "service");

  const auto index = pipeline::make_index(artifact);
  const int before = sidecar.requests_;
  const auto r = retrieval::top_k_answers("How to control fungal attack in garlic", 1, index);
  EXPECT_EQ(sidecar.requests_, before + 1);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0].answer, "Spray to mencozeb carbendazim 35-40 grampump");
}

TEST(ServiceEmbedderFitTest, UnreachableSidecarIsProviderError) {
  auto config = small_config();
  config.embedder.kind = embed::EmbedderKind::kService;
  config.embedder.endpoint = "http://127.0.0.1:1";
  EXPECT_THROW(pipeline::fit(kTable1, kCrops, config), ProviderError);
}

}  // namespace
}  // namespace agriqrs::server
