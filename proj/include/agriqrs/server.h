#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include "agriqrs/retrieval.h"

namespace agriqrs::server {

struct Response {
  int status = 200;
  std::string body;
};

// POST /query body {"text": s, "k": int}. Malformed JSON, a missing field or
// k < 1 answers 400; retrieval rejections 422; anything else 500.
Response handle_query(const retrieval::FittedIndex& index, std::string_view body);

// {"status":"ok","clusters":M}
Response handle_health(const retrieval::FittedIndex& index);

// "host:port"; a bare port binds 127.0.0.1. Throws ConfigError.
std::pair<std::string, int> parse_bind(const std::string& bind);

class QueryServer {
 public:
  explicit QueryServer(std::shared_ptr<const retrieval::FittedIndex> index);
  ~QueryServer();
  QueryServer(const QueryServer&) = delete;
  QueryServer& operator=(const QueryServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace agriqrs::server
