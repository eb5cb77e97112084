#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agriqrs {

// Base for every error the library raises. The category maps onto the CLI
// exit codes: data/contract problems exit 3, runtime faults exit 4.
class Error : public std::runtime_error {
 public:
  enum class Category { kData, kRuntime };

  explicit Error(const std::string& what, Category category = Category::kData)
      : std::runtime_error(what), category_(category) {}

  Category category() const { return category_; }

 private:
  Category category_;
};

// Missing CSV column, invalid knob value, unreadable config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable corpus input. line() is 1-based, 0 when unknown.
class IngestError : public Error {
 public:
  IngestError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A caller violated an operation precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// File-provider key lookups that miss.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Embedding provider failure (service unreachable, bad dimension).
class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what)
      : Error(what, Category::kRuntime) {}
};

// Metric undefined for the given input (e.g. silhouette with one cluster).
class MetricError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what)
      : Error(what, Category::kRuntime) {}
};

// The user query cannot be answered (empty after preprocessing).
class QueryError : public Error {
 public:
  using Error::Error;
};

// Real-time queries (market rates, weather) are out of reach of the corpus.
class UnsupportedQueryError : public QueryError {
 public:
  using QueryError::QueryError;
};

class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace agriqrs
