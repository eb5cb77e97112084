#include "agriqrs/server.h"

#include <httplib.h>

#include <json.hpp>

#include "agriqrs/errors.h"

namespace agriqrs::server {
namespace {

Response error_response(int status, const std::string& kind,
                        const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  return {status, j.dump()};
}

}  // namespace

Response handle_query(const retrieval::FittedIndex& index, std::string_view body) {
  std::string text;
  long long k = 0;
  try {
    const auto j = nlohmann::json::parse(body);
    if (!j.is_object() || !j.contains("text") || !j.at("text").is_string())
      return error_response(400, "bad_request", "body needs a string 'text'");
    text = j.at("text").get<std::string>();
    if (j.contains("k")) {
      if (!j.at("k").is_number_integer())
        return error_response(400, "bad_request", "'k' must be an integer");
      k = j.at("k").get<long long>();
    } else {
      k = 5;
    }
  } catch (const nlohmann::json::exception&) {
    return error_response(400, "bad_request", "body is not valid JSON");
  }
  if (k < 1) return error_response(400, "bad_request", "'k' must be at least 1");

  try {
    const auto ranked =
        retrieval::top_k_answers(text, static_cast<std::size_t>(k), index);
    return {200, retrieval::to_json(ranked)};
  } catch (const UnsupportedQueryError& e) {
    return error_response(422, "unsupported_query", e.what());
  } catch (const QueryError& e) {
    return error_response(422, "query_error", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

Response handle_health(const retrieval::FittedIndex& index) {
  nlohmann::ordered_json j;
  j["status"] = "ok";
  j["clusters"] = index.clusters.size();
  return {200, j.dump()};
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
  std::string host = "127.0.0.1";
  std::string port = bind;
  if (const auto colon = bind.rfind(':'); colon != std::string::npos) {
    host = bind.substr(0, colon);
    port = bind.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535 || host.empty())
      throw std::invalid_argument(port);
    return {host, p};
  } catch (const std::exception&) {
    throw ConfigError("invalid bind address '" + bind + "' (want host:port)");
  }
}

struct QueryServer::Impl {
  std::shared_ptr<const retrieval::FittedIndex> index;
  httplib::Server http;
};

QueryServer::QueryServer(std::shared_ptr<const retrieval::FittedIndex> index)
    : impl_(std::make_unique<Impl>()) {
  impl_->index = std::move(index);
  auto* impl = impl_.get();
  auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl->http.Post("/query", [impl, send](const httplib::Request& req,
                                         httplib::Response& res) {
    send(res, handle_query(*impl->index, req.body));
  });
  impl->http.Get("/health", [impl, send](const httplib::Request&,
                                         httplib::Response& res) {
    send(res, handle_health(*impl->index));
  });
}

QueryServer::~QueryServer() { stop(); }

int QueryServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
  } else if (!impl_->http.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0)
    throw Error("cannot bind " + host + ":" + std::to_string(port),
                Error::Category::kRuntime);
  return bound;
}

void QueryServer::run() { impl_->http.listen_after_bind(); }

void QueryServer::stop() {
  if (impl_) impl_->http.stop();
}

void QueryServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace agriqrs::server
