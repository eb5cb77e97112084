#include "agriqrs/cluster_metrics.h"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "agriqrs/errors.h"

namespace agriqrs::simcluster {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Scored points gathered cluster by cluster.
struct Gathered {
  RowMatrix points;
  std::vector<std::size_t> label;
  std::vector<std::size_t> sizes;
};

Gathered gather(const std::vector<embed::EmbeddingVector>& vectors,
                const ClusterSet& clusters, const char* metric) {
  if (clusters.clusters.size() < 2) {
    throw MetricError(std::string(metric) + " needs at least 2 clusters");
  }
  std::size_t total = 0;
  for (const auto& c : clusters.clusters) {
    if (c.empty()) throw MetricError(std::string(metric) + ": empty cluster");
    total += c.size();
  }
  const std::size_t dim = vectors.empty() ? 0 : vectors.front().dimension();
  Gathered g;
  g.points.resize(total, dim);
  g.label.reserve(total);
  std::size_t row = 0;
  for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
    g.sizes.push_back(clusters.clusters[c].size());
    for (std::size_t idx : clusters.clusters[c]) {
      if (idx >= vectors.size()) {
        throw ContractError(std::string(metric) + ": index out of range");
      }
      if (vectors[idx].dimension() != dim) {
        throw ContractError(std::string(metric) + ": dimension mismatch");
      }
      for (std::size_t d = 0; d < dim; ++d) g.points(row, d) = vectors[idx].values[d];
      g.label.push_back(c);
      ++row;
    }
  }
  return g;
}

RowMatrix centroids_of(const Gathered& g) {
  RowMatrix centroids = RowMatrix::Zero(g.sizes.size(), g.points.cols());
  for (Eigen::Index i = 0; i < g.points.rows(); ++i) {
    centroids.row(g.label[i]) += g.points.row(i);
  }
  for (std::size_t c = 0; c < g.sizes.size(); ++c) {
    centroids.row(c) /= static_cast<double>(g.sizes[c]);
  }
  return centroids;
}

constexpr Eigen::Index kRowBlock = 512;

}  // namespace

double silhouette_score(const std::vector<embed::EmbeddingVector>& vectors,
                        const ClusterSet& clusters) {
  const Gathered g = gather(vectors, clusters, "silhouette");
  const Eigen::Index n = g.points.rows();
  const std::size_t k = g.sizes.size();
  const Eigen::VectorXd norms = g.points.rowwise().squaredNorm();

  double total = 0.0;
  Eigen::MatrixXd cross;
  std::vector<double> sums(k);
  for (Eigen::Index r0 = 0; r0 < n; r0 += kRowBlock) {
    const Eigen::Index rows = std::min(kRowBlock, n - r0);
    cross.noalias() = g.points.middleRows(r0, rows) * g.points.transpose();
    for (Eigen::Index bi = 0; bi < rows; ++bi) {
      const Eigen::Index i = r0 + bi;
      std::fill(sums.begin(), sums.end(), 0.0);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d2 = norms[i] + norms[j] - 2.0 * cross(bi, j);
        sums[g.label[j]] += std::sqrt(std::max(d2, 0.0));
      }
      const std::size_t own = g.label[i];
      if (g.sizes[own] == 1) continue;  // contributes 0
      const double a = sums[own] / static_cast<double>(g.sizes[own] - 1);
      double b = kInf;
      for (std::size_t c = 0; c < k; ++c) {
        if (c != own) b = std::min(b, sums[c] / static_cast<double>(g.sizes[c]));
      }
      const double denom = std::max(a, b);
      if (denom > 0.0) total += (b - a) / denom;
    }
  }
  return total / static_cast<double>(n);
}

IndexValue calinski_harabasz(const std::vector<embed::EmbeddingVector>& vectors,
                             const ClusterSet& clusters) {
  const Gathered g = gather(vectors, clusters, "calinski_harabasz");
  const auto n_points = static_cast<double>(g.points.rows());
  const auto n_clusters = static_cast<double>(g.sizes.size());
  if (!(n_points > n_clusters)) {
    throw MetricError("calinski_harabasz needs more points than clusters");
  }
  const RowMatrix centroids = centroids_of(g);
  const Eigen::RowVectorXd mean = g.points.colwise().mean();

  double between = 0.0;
  for (std::size_t c = 0; c < g.sizes.size(); ++c) {
    between += static_cast<double>(g.sizes[c]) *
               (centroids.row(c) - mean).squaredNorm();
  }
  double within = 0.0;
  for (Eigen::Index i = 0; i < g.points.rows(); ++i) {
    within += (g.points.row(i) - centroids.row(g.label[i])).squaredNorm();
  }
  if (within == 0.0) return {kInf, true};
  return {(between / within) * (n_points - n_clusters) / (n_clusters - 1.0),
          false};
}

IndexValue davies_bouldin(const std::vector<embed::EmbeddingVector>& vectors,
                          const ClusterSet& clusters) {
  const Gathered g = gather(vectors, clusters, "davies_bouldin");
  const std::size_t k = g.sizes.size();
  const RowMatrix centroids = centroids_of(g);

  std::vector<double> spread(k, 0.0);
  for (Eigen::Index i = 0; i < g.points.rows(); ++i) {
    spread[g.label[i]] += (g.points.row(i) - centroids.row(g.label[i])).norm();
  }
  for (std::size_t c = 0; c < k; ++c) spread[c] /= static_cast<double>(g.sizes[c]);

  IndexValue result;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      const double d = (centroids.row(i) - centroids.row(j)).norm();
      const double term = d > 0.0 ? (spread[i] + spread[j]) / d : kInf;
      worst = std::max(worst, term);
    }
    if (std::isinf(worst)) result.degenerate = true;
    total += worst;
  }
  result.value = total / static_cast<double>(k);
  return result;
}

}  // namespace agriqrs::simcluster
