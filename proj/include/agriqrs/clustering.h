#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "agriqrs/embed.h"
#include "agriqrs/similarity.h"

namespace agriqrs::simcluster {

struct ClusterSet {
  std::vector<std::vector<std::size_t>> clusters;  // members ascending
  std::vector<std::size_t> dropped;                // removed by the size rule

  std::size_t item_count() const;
  friend bool operator==(const ClusterSet&, const ClusterSet&) = default;
};

// Seeded linear-scan clustering. Items are visited in index order; an
// unvisited item opens a cluster and absorbs every later unvisited item whose
// similarity to it reaches `thresh`. Clusters smaller than `min_size` are
// moved to `dropped`.
ClusterSet threshold_cluster(const SimilarityMatrix& sim, double thresh,
                             std::size_t min_size);

// Lloyd iterations from a seeded k-means++ start, Euclidean distance. An
// emptied cluster takes the point farthest from its current centroid.
ClusterSet kmeans_baseline(const std::vector<embed::EmbeddingVector>& vectors,
                           std::size_t k, std::uint64_t seed,
                           std::size_t max_iter = 100);

}  // namespace agriqrs::simcluster
