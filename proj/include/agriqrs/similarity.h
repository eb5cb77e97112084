#pragma once

#include <algorithm>
#include <cstddef>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "agriqrs/corpus.h"
#include "agriqrs/embed.h"

namespace agriqrs::simcluster {

// Allocator for the matrix storage: large blocks are 2 MiB aligned and
// advised for transparent huge pages, which cuts page-fault time on
// multi-hundred-megabyte matrices.
template <typename T>
struct LargeBlockAllocator {
  using value_type = T;
  LargeBlockAllocator() = default;
  template <typename U>
  LargeBlockAllocator(const LargeBlockAllocator<U>&) {}
  T* allocate(std::size_t n);
  void deallocate(T* p, std::size_t n) noexcept;
  template <typename U>
  bool operator==(const LargeBlockAllocator<U>&) const { return true; }
};

// Symmetric n x n score matrix with unit diagonal. Only the strict upper
// triangle is stored, row by row, so row i's entries for j > i are
// contiguous.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n);

  // Validates symmetry, unit diagonal and range [0, 1]; throws ContractError.
  static SimilarityMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 1.0;
    if (i > j) std::swap(i, j);
    return upper_[offset(i) + (j - i - 1)];
  }

  void set(std::size_t i, std::size_t j, double value);

  // Entries (i, i+1) .. (i, n-1).
  std::span<const double> upper_row(std::size_t i) const {
    return {upper_.data() + offset(i), n_ - i - 1};
  }
  std::span<double> upper_row(std::size_t i) {
    return {upper_.data() + offset(i), n_ - i - 1};
  }

  // Debug dump: two little-endian uint32 (n, n) followed by n*n row-major
  // little-endian float32.
  void write_binary(std::ostream& out) const;
  static SimilarityMatrix read_binary(std::istream& in);

 private:
  std::size_t offset(std::size_t i) const { return i * n_ - i * (i + 1) / 2; }

  std::size_t n_ = 0;
  std::vector<double, LargeBlockAllocator<double>> upper_;
};

// |a & b| / |a | b| over sorted, duplicate-free ranges. Two empty sets are
// identical and score 1.
template <typename T>
double jaccard_sorted(std::span<const T> a, std::span<const T> b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double jaccard_similarity(const std::set<std::string>& a,
                          const std::set<std::string>& b);

struct ClusterParams {
  double lambda = 0.8;
  double thresh = 0.95;
  std::size_t min_size = 2;

  void validate() const;  // throws ConfigError
};

// Hybrid score per pair: lambda * max(cos, 0) + (1 - lambda) * jaccard.
SimilarityMatrix query_similarity_matrix(
    const std::vector<corpus::PreprocessedQuery>& queries,
    const std::vector<embed::EmbeddingVector>& embeddings,
    const ClusterParams& params);

}  // namespace agriqrs::simcluster
