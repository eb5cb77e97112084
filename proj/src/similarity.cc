#include "agriqrs/similarity.h"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <new>
#include <istream>
#include <map>
#include <ostream>

#include "agriqrs/errors.h"

#ifdef __linux__
#include <sys/mman.h>
#endif

namespace agriqrs::simcluster {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {
      static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
      static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw ContractError("similarity dump truncated");
  }
  return static_cast<std::uint32_t>(bytes[0]) |
         (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

constexpr std::size_t kRowBlock = 128;
constexpr std::size_t kColBlock = 512;

}  // namespace

namespace {
constexpr std::size_t kHugePage = std::size_t{1} << 21;
}  // namespace

template <typename T>
T* LargeBlockAllocator<T>::allocate(std::size_t n) {
  const std::size_t bytes = n * sizeof(T);
  if (bytes < kHugePage) return static_cast<T*>(::operator new(bytes));
  const std::size_t rounded = (bytes + kHugePage - 1) / kHugePage * kHugePage;
  void* p = std::aligned_alloc(kHugePage, rounded);
  if (!p) throw std::bad_alloc();
#ifdef MADV_HUGEPAGE
  madvise(p, rounded, MADV_HUGEPAGE);
#endif
  return static_cast<T*>(p);
}

template <typename T>
void LargeBlockAllocator<T>::deallocate(T* p, std::size_t n) noexcept {
  if (n * sizeof(T) < kHugePage)
    ::operator delete(p);
  else
    std::free(p);
}

template struct LargeBlockAllocator<double>;

SimilarityMatrix::SimilarityMatrix(std::size_t n)
    : n_(n), upper_(n ? n * (n - 1) / 2 : 0, 0.0) {}

void SimilarityMatrix::set(std::size_t i, std::size_t j, double value) {
  if (i == j) {
    if (value != 1.0) throw ContractError("similarity diagonal must be 1");
    return;
  }
  if (i > j) std::swap(i, j);
  upper_[offset(i) + (j - i - 1)] = value;
}

SimilarityMatrix SimilarityMatrix::from_rows(
    const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  SimilarityMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw ContractError("similarity matrix not square");
    if (rows[i][i] != 1.0) throw ContractError("similarity diagonal must be 1");
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = rows[i][j];
      if (v != rows[j][i]) throw ContractError("similarity matrix not symmetric");
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ContractError("similarity entries must lie in [0, 1]");
      }
      m.set(i, j, v);
    }
  }
  return m;
}

void SimilarityMatrix::write_binary(std::ostream& out) const {
  static_assert(std::endian::native == std::endian::little,
                "binary dump assumes a little-endian host");
  write_u32_le(out, static_cast<std::uint32_t>(n_));
  write_u32_le(out, static_cast<std::uint32_t>(n_));
  std::vector<float> row(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      row[j] = static_cast<float>((*this)(i, j));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

SimilarityMatrix SimilarityMatrix::read_binary(std::istream& in) {
  const auto rows = read_u32_le(in);
  const auto cols = read_u32_le(in);
  if (rows != cols) throw ContractError("similarity dump is not square");
  SimilarityMatrix m(rows);
  std::vector<float> row(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(float)))) {
      throw ContractError("similarity dump truncated");
    }
    for (std::size_t j = i + 1; j < rows; ++j) m.set(i, j, row[j]);
  }
  return m;
}

double jaccard_similarity(const std::set<std::string>& a,
                          const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  return static_cast<double>(inter) /
         static_cast<double>(a.size() + b.size() - inter);
}

void ClusterParams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("lambda must lie in [0, 1]");
  }
  if (!(thresh >= 0.0 && thresh <= 1.0)) {
    throw ConfigError("thresh must lie in [0, 1]");
  }
  if (min_size < 1) throw ConfigError("min_size must be >= 1");
}

SimilarityMatrix query_similarity_matrix(
    const std::vector<corpus::PreprocessedQuery>& queries,
    const std::vector<embed::EmbeddingVector>& embeddings,
    const ClusterParams& params) {
  params.validate();
  const std::size_t n = queries.size();
  if (embeddings.size() != n) {
    throw ContractError("query_similarity_matrix: " + std::to_string(n) +
                        " queries but " + std::to_string(embeddings.size()) +
                        " embeddings");
  }
  SimilarityMatrix sim(n);
  if (n == 0) return sim;
  const std::size_t dim = embeddings.front().dimension();

  // Unit rows, so one GEMM gives the cosines. Zero rows stay zero and score 0.
  RowMatrix unit(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (embeddings[i].dimension() != dim) {
      throw ContractError("query_similarity_matrix: embeddings differ in dimension");
    }
    const double norm = embed::l2_norm(embeddings[i]);
    for (std::size_t d = 0; d < dim; ++d) {
      unit(i, d) = norm > 0.0 ? embeddings[i].values[d] / norm : 0.0;
    }
  }

  // Token sets as sorted ids for fast intersections.
  std::map<std::string, std::uint32_t> ids;
  std::vector<std::vector<std::uint32_t>> token_ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& t : queries[i].tokens_lexical) {
      auto [it, inserted] = ids.emplace(t, static_cast<std::uint32_t>(ids.size()));
      token_ids[i].push_back(it->second);
    }
    std::sort(token_ids[i].begin(), token_ids[i].end());
    token_ids[i].erase(std::unique(token_ids[i].begin(), token_ids[i].end()),
                       token_ids[i].end());
  }

  const double lambda = params.lambda;
  // Tiles small enough that the cosine block stays in cache; row-major so the
  // per-row scan below reads contiguously.
  RowMatrix tile;
  for (std::size_t r0 = 0; r0 < n; r0 += kRowBlock) {
    const std::size_t rows = std::min(kRowBlock, n - r0);
    for (std::size_t c0 = r0; c0 < n; c0 += kColBlock) {
      const std::size_t cols = std::min(kColBlock, n - c0);
      tile.noalias() = unit.block(r0, 0, rows, dim) *
                       unit.block(c0, 0, cols, dim).transpose();
      for (std::size_t bi = 0; bi < rows; ++bi) {
        const std::size_t i = r0 + bi;
        auto row = sim.upper_row(i);
        const std::span<const std::uint32_t> ti(token_ids[i]);
        for (std::size_t j = std::max(c0, i + 1); j < c0 + cols; ++j) {
          const double cosine = std::clamp(tile(bi, j - c0), 0.0, 1.0);
          const double jac = jaccard_sorted<std::uint32_t>(ti, token_ids[j]);
          row[j - i - 1] =
              std::clamp(lambda * cosine + (1.0 - lambda) * jac, 0.0, 1.0);
        }
      }
    }
  }
  return sim;
}

}  // namespace agriqrs::simcluster
