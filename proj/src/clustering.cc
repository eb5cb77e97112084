#include "agriqrs/clustering.h"

#include <Eigen/Dense>
#include <limits>

#include "agriqrs/errors.h"
#include "agriqrs/rng.h"

namespace agriqrs::simcluster {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t ClusterSet::item_count() const {
  std::size_t total = dropped.size();
  for (const auto& c : clusters) total += c.size();
  return total;
}

ClusterSet threshold_cluster(const SimilarityMatrix& sim, double thresh,
                             std::size_t min_size) {
  const std::size_t n = sim.size();
  ClusterSet result;
  // Unvisited items in ascending order; its head is always the next seed.
  std::vector<std::size_t> pending(n);
  for (std::size_t i = 0; i < n; ++i) pending[i] = i;
  std::vector<std::size_t> rest;
  rest.reserve(n);

  std::size_t head = 0;
  while (head < pending.size()) {
    const std::size_t seed = pending[head];
    const auto row = sim.upper_row(seed);
    std::vector<std::size_t> members{seed};
    rest.clear();
    for (std::size_t p = head + 1; p < pending.size(); ++p) {
      const std::size_t j = pending[p];
      if (row[j - seed - 1] >= thresh) {
        members.push_back(j);
      } else {
        rest.push_back(j);
      }
    }
    pending.swap(rest);
    head = 0;
    if (members.size() >= min_size) {
      result.clusters.push_back(std::move(members));
    } else {
      result.dropped.insert(result.dropped.end(), members.begin(), members.end());
    }
  }
  return result;
}

namespace {

RowMatrix to_matrix(const std::vector<embed::EmbeddingVector>& vectors) {
  const std::size_t n = vectors.size();
  const std::size_t dim = n ? vectors.front().dimension() : 0;
  RowMatrix x(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (vectors[i].dimension() != dim) {
      throw ContractError("vectors differ in dimension");
    }
    for (std::size_t d = 0; d < dim; ++d) x(i, d) = vectors[i].values[d];
  }
  return x;
}

}  // namespace

ClusterSet kmeans_baseline(const std::vector<embed::EmbeddingVector>& vectors,
                           std::size_t k, std::uint64_t seed,
                           std::size_t max_iter) {
  const std::size_t n = vectors.size();
  if (k == 0) throw ContractError("kmeans_baseline: k must be positive");
  if (k > n) {
    throw ContractError("kmeans_baseline: k=" + std::to_string(k) +
                        " exceeds point count " + std::to_string(n));
  }
  if (max_iter < 1) throw ContractError("kmeans_baseline: max_iter must be >= 1");

  const RowMatrix x = to_matrix(vectors);
  const Eigen::VectorXd sq_norms = x.rowwise().squaredNorm();
  Rng rng(seed);

  // k-means++ seeding.
  RowMatrix centroids(k, x.cols());
  std::vector<bool> chosen(n, false);
  std::size_t first = rng.below(n);
  centroids.row(0) = x.row(first);
  chosen[first] = true;
  Eigen::VectorXd best_d2 = (x.rowwise() - x.row(first)).rowwise().squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = best_d2.sum();
    std::size_t pick = n;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (best_d2[i] <= 0.0) continue;
        target -= best_d2[i];
        pick = i;
        if (target < 0.0) break;
      }
    }
    if (pick == n) {
      // Every remaining point coincides with a centre; take any unused one.
      std::vector<std::size_t> unused;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) unused.push_back(i);
      }
      pick = unused[rng.below(unused.size())];
    }
    chosen[pick] = true;
    centroids.row(c) = x.row(pick);
    best_d2 = best_d2.cwiseMin(
        (x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }

  std::vector<std::size_t> assign(n, k);
  std::vector<double> dist2(n, 0.0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    // Squared distances via |x|^2 - 2 x.c + |c|^2.
    const Eigen::MatrixXd cross = x * centroids.transpose();
    const Eigen::VectorXd c_norms = centroids.rowwise().squaredNorm();
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_val = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d2 = sq_norms[i] - 2.0 * cross(i, c) + c_norms[c];
        if (d2 < best_val) {
          best_val = d2;
          best = c;
        }
      }
      dist2[i] = std::max(best_val, 0.0);
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[assign[i]];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      // Reseed from the farthest point whose cluster can spare it.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[assign[i]] <= 1) continue;
        if (far == n || dist2[i] > dist2[far]) far = i;
      }
      if (far == n) break;
      --counts[assign[far]];
      assign[far] = c;
      dist2[far] = 0.0;
      counts[c] = 1;
      changed = true;
    }

    centroids.setZero();
    for (std::size_t i = 0; i < n; ++i) centroids.row(assign[i]) += x.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c]) centroids.row(c) /= static_cast<double>(counts[c]);
    }
    if (!changed) break;
  }

  ClusterSet result;
  result.clusters.resize(k);
  for (std::size_t i = 0; i < n; ++i) result.clusters[assign[i]].push_back(i);
  std::erase_if(result.clusters, [](const auto& c) { return c.empty(); });
  return result;
}

}  // namespace agriqrs::simcluster
