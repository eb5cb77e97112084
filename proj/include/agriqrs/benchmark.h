#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "agriqrs/clustering.h"
#include "agriqrs/similarity.h"

namespace agriqrs::simcluster {

struct BenchmarkRow {
  std::string method;  // "threshold" or "kmeans"
  std::size_t n = 0;
  double seconds = 0.0;
  double silhouette = 0.0;  // NaN when undefined
  double ch_index = 0.0;
  double db_index = 0.0;
};

// Metrics of `clusters` and of K-Means (k = cluster count) on the points
// those clusters keep. Only the K-Means row carries a time.
std::vector<BenchmarkRow> compare_with_kmeans(
    const std::vector<embed::EmbeddingVector>& vectors,
    const ClusterSet& clusters, std::uint64_t seed);

// For each size: synthesize a corpus, embed it with the hashed provider (not
// timed), then time similarity matrix + threshold clustering, and K-Means
// with k equal to the threshold cluster count over the same retained points.
std::vector<BenchmarkRow> benchmark_clustering(
    const std::vector<std::size_t>& sizes, const ClusterParams& params,
    std::uint64_t seed, std::size_t dimension = 768);

// Header `method,n,seconds,silhouette,ch_index,db_index`.
void write_benchmark_csv(const std::vector<BenchmarkRow>& rows, std::ostream& out);

std::string format_metric(double value);

}  // namespace agriqrs::simcluster
