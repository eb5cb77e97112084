#include "agriqrs/benchmark.h"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "agriqrs/cluster_metrics.h"
#include "agriqrs/clustering.h"
#include "agriqrs/errors.h"
#include "agriqrs/synthetic_corpus.h"

namespace agriqrs::simcluster {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void fill_metrics(BenchmarkRow& row,
                  const std::vector<embed::EmbeddingVector>& vectors,
                  const ClusterSet& clusters) {
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  if (clusters.clusters.size() < 2) {
    row.silhouette = row.ch_index = row.db_index = kNaN;
    return;
  }
  // Metrics undefined for this partition (e.g. all singletons) stay NaN.
  auto or_nan = [&](auto metric) {
    try {
      return metric();
    } catch (const MetricError&) {
      return kNaN;
    }
  };
  row.silhouette = or_nan([&] { return silhouette_score(vectors, clusters); });
  row.ch_index = or_nan([&] { return calinski_harabasz(vectors, clusters).value; });
  row.db_index = or_nan([&] { return davies_bouldin(vectors, clusters).value; });
}

}  // namespace

std::vector<BenchmarkRow> compare_with_kmeans(
    const std::vector<embed::EmbeddingVector>& vectors,
    const ClusterSet& clusters, std::uint64_t seed) {
  BenchmarkRow threshold_row{"threshold", vectors.size()};
  fill_metrics(threshold_row, vectors, clusters);

  // K-Means sees only the points threshold clustering kept.
  std::vector<embed::EmbeddingVector> kept;
  for (const auto& c : clusters.clusters) {
    for (std::size_t i : c) kept.push_back(vectors[i]);
  }
  BenchmarkRow kmeans_row{"kmeans", vectors.size()};
  const std::size_t k = std::max<std::size_t>(1, clusters.clusters.size());
  if (kept.size() >= k) {
    const auto start = Clock::now();
    const auto km = kmeans_baseline(kept, k, seed);
    kmeans_row.seconds = seconds_since(start);
    fill_metrics(kmeans_row, kept, km);
  } else {
    fill_metrics(kmeans_row, kept, {});
  }
  return {threshold_row, kmeans_row};
}

std::vector<BenchmarkRow> benchmark_clustering(
    const std::vector<std::size_t>& sizes, const ClusterParams& params,
    std::uint64_t seed, std::size_t dimension) {
  params.validate();
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw ConfigError("bench sizes must ascend");
  }
  const auto config = corpus::CorpusConfig::defaults();
  embed::HashedEmbedder embedder(dimension, seed);

  std::vector<BenchmarkRow> rows;
  for (std::size_t n : sizes) {
    synthetic::SyntheticOptions options;
    options.size = n;
    options.seed = seed + n;
    const auto corpus = synthetic::make_synthetic_corpus(options);
    const auto prep = corpus::preprocess_corpus(
        corpus.records, synthetic::lexicon_of(corpus), config);
    std::vector<std::string> texts;
    for (const auto& q : prep.queries) texts.push_back(q.text_contextual);
    const auto vectors = embedder.embed_batch(texts);

    BenchmarkRow threshold_row{"threshold", n};
    auto start = Clock::now();
    const auto sim = query_similarity_matrix(prep.queries, vectors, params);
    const auto clusters = threshold_cluster(sim, params.thresh, params.min_size);
    threshold_row.seconds = seconds_since(start);
    fill_metrics(threshold_row, vectors, clusters);

    auto compared = compare_with_kmeans(vectors, clusters, seed);
    BenchmarkRow kmeans_row = compared[1];
    kmeans_row.n = n;
    rows.push_back(threshold_row);
    rows.push_back(kmeans_row);
  }
  return rows;
}

std::string format_metric(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(10) << value;
  return s.str();
}

void write_benchmark_csv(const std::vector<BenchmarkRow>& rows,
                         std::ostream& out) {
  out << "method,n,seconds,silhouette,ch_index,db_index\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.n << ',' << format_metric(r.seconds) << ','
        << format_metric(r.silhouette) << ',' << format_metric(r.ch_index)
        << ',' << format_metric(r.db_index) << '\n';
  }
}

}  // namespace agriqrs::simcluster
