#pragma once

#include <vector>

#include "agriqrs/clustering.h"
#include "agriqrs/embed.h"

namespace agriqrs::simcluster {

// Internal quality indices over the points listed in `clusters` (dropped
// points are not scored). Distances are Euclidean in embedding space.

// Mean of (b - a) / max(a, b). Singleton clusters contribute 0.
// Throws MetricError with fewer than two clusters.
double silhouette_score(const std::vector<embed::EmbeddingVector>& vectors,
                        const ClusterSet& clusters);

// An index that can diverge. A degenerate value is +infinity.
struct IndexValue {
  double value = 0.0;
  bool degenerate = false;
};

// (Tr(B) / Tr(W)) * (N - n) / (n - 1). Tr(W) == 0 gives +infinity.
IndexValue calinski_harabasz(const std::vector<embed::EmbeddingVector>& vectors,
                             const ClusterSet& clusters);

// Mean over clusters of the worst (s_i + s_j) / d(c_i, c_j). Coincident
// centroids make the pair term, and so the index, +infinity.
IndexValue davies_bouldin(const std::vector<embed::EmbeddingVector>& vectors,
                          const ClusterSet& clusters);

}  // namespace agriqrs::simcluster
