// Acceptance checks. One line per criterion: PASS or FAIL, name, measurements.
// With an argument, only the named criterion runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "agriqrs/benchmark.h"
#include "agriqrs/classification_metrics.h"
#include "agriqrs/clustering.h"
#include "agriqrs/corpus.h"
#include "agriqrs/embed.h"
#include "agriqrs/errors.h"
#include "agriqrs/evalharness.h"
#include "agriqrs/mapper.h"
#include "agriqrs/pipeline.h"
#include "agriqrs/retrieval.h"
#include "agriqrs/rng.h"
#include "agriqrs/similarity.h"
#include "agriqrs/synthetic_corpus.h"

namespace {

using namespace agriqrs;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned thresholds.
constexpr int kOracleMatrices = 200;
constexpr std::size_t kOracleMaxN = 50;
constexpr double kOracleSeconds = 1.0;

constexpr std::size_t kQualityCorpus = 2000;
constexpr std::size_t kQualityTemplates = 20;
constexpr double kQualityNoise = 0.1;
constexpr double kMinSilhouette = 0.7;
// Identical partitions score the same silhouette up to summation order.
constexpr double kSilhouetteTieTolerance = 1e-9;
constexpr double kQualitySeconds = 30.0;

constexpr std::size_t kRuntimeBase = 1250;
constexpr int kDoublings = 3;
constexpr int kRuntimeRepeats = 5;
constexpr double kRuntimeSeconds = 10.0;
constexpr double kMaxDoublingRatio = 4.5;

constexpr double kMinHeldOutAccuracy = 0.95;
constexpr double kMapperSeconds = 300.0;

constexpr std::size_t kGradHidden = 16;
constexpr double kGradTolerance = 1e-4;

constexpr int kMetricSets = 1000;

constexpr double kNdcgExpected = 0.83383;
constexpr double kNdcgTolerance = 1e-4;

const std::string kTable1 = std::string(AGRIQRS_FIXTURES) + "/table1.csv";
const std::string kCrops = std::string(AGRIQRS_DATA) + "/crops.txt";
const std::string kGarlicQuery = "How to control fungal attack in garlic";
const std::string kGarlicAnswer = "Spray to mencozeb carbendazim 35-40 grampump";

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string artifact_bytes(const fs::path& dir) {
  std::string all;
  for (const char* f : {"manifest.json", "records.jsonl", "clusters.json", "weights.bin"})
    all += slurp(dir / f) + '\x1e';
  return all;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("agriqrs_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

// Straight transliteration of Algorithm 1 over a dense matrix.
simcluster::ClusterSet algorithm1(const std::vector<std::vector<double>>& sim,
                                  double thresh, std::size_t min) {
  const std::size_t n = sim.size();
  std::vector<bool> visited(n, false);
  simcluster::ClusterSet out;
  for (std::size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    visited[i] = true;
    std::vector<std::size_t> cluster{i};
    for (std::size_t j = i + 1; j < n; ++j)
      if (!visited[j] && sim[i][j] >= thresh) {
        visited[j] = true;
        cluster.push_back(j);
      }
    if (cluster.size() >= min)
      out.clusters.push_back(cluster);
    else
      out.dropped.insert(out.dropped.end(), cluster.begin(), cluster.end());
  }
  std::sort(out.dropped.begin(), out.dropped.end());
  return out;
}

Outcome oracle_equivalence() {
  Rng rng(2024);
  int mismatches = 0;
  double elapsed = 0.0;
  for (int t = 0; t < kOracleMatrices; ++t) {
    const std::size_t n = 1 + rng.below(kOracleMaxN);
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double u = rng.uniform();
        rows[i][j] = rows[j][i] = u < 0.3 ? 0.95 : (u < 0.6 ? rng.uniform(0.9, 1.0) : rng.uniform());
      }
    const double thresh = 0.95;
    const std::size_t min = 1 + rng.below(3);
    const auto m = simcluster::SimilarityMatrix::from_rows(rows);
    const auto start = Clock::now();
    auto got = simcluster::threshold_cluster(m, thresh, min);
    elapsed += seconds_since(start);
    std::sort(got.dropped.begin(), got.dropped.end());
    if (!(got == algorithm1(rows, thresh, min))) ++mismatches;
  }
  return {mismatches == 0 && elapsed < kOracleSeconds,
          "matrices=" + std::to_string(kOracleMatrices) + " mismatches=" +
              std::to_string(mismatches) + " seconds=" + fmt(elapsed) + " (limit " +
              fmt(kOracleSeconds) + ")"};
}

Outcome order_dependence() {
  // a~b and b~c clear 0.95, a~c does not.
  const auto m = simcluster::SimilarityMatrix::from_rows(
      {{1.0, 0.97, 0.5}, {0.97, 1.0, 0.97}, {0.5, 0.97, 1.0}});
  const auto got = simcluster::threshold_cluster(m, 0.95, 1);
  const std::vector<std::vector<std::size_t>> expected{{0, 1}, {2}};
  std::string shape;
  for (const auto& c : got.clusters) {
    shape += "[";
    for (auto i : c) shape += static_cast<char>('a' + i);
    shape += "]";
  }
  return {got.clusters == expected && got.dropped.empty(), "clusters=" + shape};
}

struct Clustered {
  std::vector<embed::EmbeddingVector> vectors;
  simcluster::ClusterSet clusters;
  std::size_t queries = 0;
};

// The fit stages up to clustering, on the synthetic templated corpus.
Clustered cluster_synthetic(const pipeline::PipelineConfig& config) {
  synthetic::SyntheticOptions options;
  options.size = kQualityCorpus;
  options.templates = kQualityTemplates;
  options.token_noise = kQualityNoise;
  const auto corpus = synthetic::make_synthetic_corpus(options);
  const auto corpus_config = corpus::CorpusConfig::defaults();
  const auto loaded = corpus::clean_rows(corpus.records);
  const auto prep = corpus::preprocess_corpus(loaded.records, synthetic::lexicon_of(corpus),
                                              corpus_config);
  std::vector<std::string> texts;
  for (const auto& q : prep.queries) texts.push_back(q.text_contextual);
  Clustered out;
  out.queries = prep.queries.size();
  out.vectors = embed::make_embedder(config.embedder)->embed_batch(texts);
  const auto sim = simcluster::query_similarity_matrix(prep.queries, out.vectors, config.cluster);
  out.clusters = simcluster::threshold_cluster(sim, config.cluster.thresh, config.cluster.min_size);
  return out;
}

Outcome quality_analogue() {
  const auto start = Clock::now();
  const pipeline::PipelineConfig config;
  const auto c = cluster_synthetic(config);
  const auto rows = simcluster::compare_with_kmeans(c.vectors, c.clusters, config.train.seed);
  const double elapsed = seconds_since(start);
  const double ours = rows[0].silhouette, kmeans = rows[1].silhouette;
  const bool pass = ours >= kMinSilhouette && ours + kSilhouetteTieTolerance >= kmeans &&
                    elapsed < kQualitySeconds;
  return {pass, "queries=" + std::to_string(c.queries) +
                    " clusters=" + std::to_string(c.clusters.clusters.size()) +
                    " clustered=" + std::to_string(c.clusters.item_count() - c.clusters.dropped.size()) +
                    " silhouette=" + fmt(ours, 10) + " kmeans_silhouette=" + fmt(kmeans, 10) +
                    " ch=" + simcluster::format_metric(rows[0].ch_index) +
                    " db=" + simcluster::format_metric(rows[0].db_index) +
                    " seconds=" + fmt(elapsed) + " (limits: silhouette>=" + fmt(kMinSilhouette) +
                    ", >=kmeans-" + fmt(kSilhouetteTieTolerance) + ", <" + fmt(kQualitySeconds) + "s)"};
}

Outcome runtime_analogue() {
  const pipeline::PipelineConfig config;
  const auto corpus_config = corpus::CorpusConfig::defaults();
  embed::HashedEmbedder embedder(config.embedder.dimension, config.embedder.seed);
  std::vector<double> times;
  std::string detail;
  for (int d = 0; d <= kDoublings; ++d) {
    const std::size_t n = kRuntimeBase << d;
    synthetic::SyntheticOptions options;
    options.size = n;
    options.templates = kQualityTemplates;
    options.token_noise = kQualityNoise;
    options.seed = 11 + n;
    const auto corpus = synthetic::make_synthetic_corpus(options);
    // Exact n: no deduplication, so every size is a true doubling.
    const auto prep = corpus::preprocess_corpus(corpus.records, synthetic::lexicon_of(corpus),
                                                corpus_config);
    std::vector<std::string> texts;
    for (const auto& q : prep.queries) texts.push_back(q.text_contextual);
    const auto vectors = embedder.embed_batch(texts);
    double best = 1e300;
    for (int r = 0; r < kRuntimeRepeats; ++r) {
      const auto start = Clock::now();
      const auto sim = simcluster::query_similarity_matrix(prep.queries, vectors, config.cluster);
      const auto clusters =
          simcluster::threshold_cluster(sim, config.cluster.thresh, config.cluster.min_size);
      best = std::min(best, seconds_since(start));
      if (clusters.item_count() != prep.queries.size()) return {false, "partition lost items"};
    }
    times.push_back(best);
    detail += " n=" + std::to_string(prep.queries.size()) + ":" + fmt(best, 4) + "s";
  }
  double worst_ratio = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i)
    worst_ratio = std::max(worst_ratio, times[i] / times[i - 1]);
  const bool pass = times.back() < kRuntimeSeconds && worst_ratio <= kMaxDoublingRatio;
  return {pass, detail.substr(1) + " worst_doubling_ratio=" + fmt(worst_ratio, 4) +
                    " (limits: largest <" + fmt(kRuntimeSeconds) + "s, ratio <=" +
                    fmt(kMaxDoublingRatio) + ", best of " + std::to_string(kRuntimeRepeats) + ")"};
}

Outcome mapper_analogue() {
  const pipeline::PipelineConfig config;  // Table 3 hyperparameters
  const auto c = cluster_synthetic(config);
  const auto start = Clock::now();
  const auto h = pipeline::evaluate_holdout(c.vectors, c.clusters, config);
  const double elapsed = seconds_since(start);
  return {h.report.accuracy >= kMinHeldOutAccuracy && elapsed < kMapperSeconds,
          "classes=" + std::to_string(c.clusters.clusters.size()) +
              " train=" + std::to_string(h.train_size) + " test=" + std::to_string(h.test_size) +
              " accuracy=" + fmt(h.report.accuracy) + " weighted_f1=" + fmt(h.report.weighted_f1) +
              " train_seconds=" + fmt(elapsed) + " (limits: accuracy>=" + fmt(kMinHeldOutAccuracy) +
              ", <" + fmt(kMapperSeconds) + "s)"};
}

Outcome gradient_check() {
  mapper::MapperDims dims;
  dims.input = 24;
  dims.hidden1 = kGradHidden;
  dims.hidden2 = kGradHidden;
  dims.classes = 5;
  const auto model = mapper::MapperModel::initialized(mapper::MapperKind::kLstm, dims, 0.2, 7);
  Rng rng(8);
  std::vector<mapper::LabeledExample> batch;
  for (int i = 0; i < 8; ++i) {
    mapper::LabeledExample e;
    for (std::size_t d = 0; d < dims.input; ++d) e.embedding.values.push_back(rng.normal());
    e.label = rng.below(dims.classes);
    batch.push_back(std::move(e));
  }
  const auto g = mapper::gradient_check(model, batch, kGradTolerance);
  const bool all_touched = std::all_of(g.tensor_gradient_norms.begin(),
                                       g.tensor_gradient_norms.end(),
                                       [](double v) { return v > 0.0; });
  return {g.max_relative_error < kGradTolerance && all_touched,
          "hidden=" + std::to_string(kGradHidden) + " max_relative_error=" +
              fmt(g.max_relative_error, 3) + " (limit " + fmt(kGradTolerance) + ")"};
}

Outcome metric_identities() {
  Rng rng(31);
  int recall_mismatch = 0, map_precision_mismatch = 0;
  double worst_gap = 0.0;
  std::string example;
  for (int t = 0; t < kMetricSets; ++t) {
    const std::size_t n = 1 + rng.below(100);
    const std::size_t classes = 2 + rng.below(10);
    std::vector<std::size_t> truth, pred;
    std::vector<std::vector<int>> relevance;
    for (std::size_t i = 0; i < n; ++i) {
      truth.push_back(rng.below(classes));
      pred.push_back(rng.bernoulli(0.7) ? truth.back() : rng.below(classes));
      // All-or-nothing: a mapped query's answers are relevant iff its cluster
      // was right.
      relevance.emplace_back(5, pred.back() == truth.back() ? 1 : 0);
    }
    const auto r = mapper::evaluate_predictions(truth, pred);
    if (r.weighted_recall != r.accuracy) ++recall_mismatch;
    const double map = evalharness::map_score(relevance);
    if (map != r.weighted_precision) {
      if (map_precision_mismatch == 0)
        example = " first_gap: map=" + fmt(map) + " weighted_precision=" +
                  fmt(r.weighted_precision) + " accuracy=" + fmt(r.accuracy);
      ++map_precision_mismatch;
      worst_gap = std::max(worst_gap, std::abs(map - r.weighted_precision));
    }
  }
  return {recall_mismatch == 0 && map_precision_mismatch == 0,
          "sets=" + std::to_string(kMetricSets) +
              " recall!=accuracy:" + std::to_string(recall_mismatch) +
              " map!=weighted_precision:" + std::to_string(map_precision_mismatch) +
              " worst_gap=" + fmt(worst_gap) + example};
}

Outcome ndcg_hand_case() {
  const double v = evalharness::ndcg(evalharness::ScoredRanking::from_predicted({2, 3}));
  const double sorted = evalharness::ndcg(evalharness::ScoredRanking::from_predicted({3, 2}));
  return {std::abs(v - kNdcgExpected) <= kNdcgTolerance && sorted == 1.0,
          "ndcg([2,3])=" + fmt(v, 8) + " expected " + fmt(kNdcgExpected) + "+-" +
              fmt(kNdcgTolerance) + " ndcg([3,2])=" + fmt(sorted, 17)};
}

pipeline::PipelineConfig table1_config() {
  pipeline::PipelineConfig config;
  // Five distinct rows form singleton clusters only.
  config.cluster.min_size = 1;
  return config;
}

Outcome end_to_end() {
  const auto dir = scratch("e2e");
  const auto artifact = pipeline::fit(kTable1, kCrops, table1_config());
  const auto r = retrieval::top_k_answers(kGarlicQuery, 1, pipeline::make_index(artifact));
  const bool garlic = r.entries.size() == 1 && r.entries[0].rank == 1 &&
                      r.entries[0].answer == kGarlicAnswer;

  pipeline::save_artifact(artifact, (dir / "a").string());
  const auto loaded = pipeline::load_artifact((dir / "a").string());
  pipeline::save_artifact(loaded, (dir / "b").string());
  const bool bytes = artifact_bytes(dir / "a") == artifact_bytes(dir / "b");
  const auto r2 = retrieval::top_k_answers(kGarlicQuery, 1, pipeline::make_index(loaded));
  const bool same = retrieval::to_json(r) == retrieval::to_json(r2);
  fs::remove_all(dir);
  return {garlic && bytes && same,
          std::string("rank1=\"") + (r.entries.empty() ? "" : r.entries[0].answer) +
              "\" artifact_bytes_equal=" + (bytes ? "yes" : "no") +
              " result_bytes_equal=" + (same ? "yes" : "no")};
}

struct RunBytes {
  std::string artifact;
  std::string outputs;
};

RunBytes fit_and_query(const std::string& csv, const corpus::CropLexicon& lexicon,
                       const pipeline::PipelineConfig& config,
                       const std::vector<std::string>& queries, const fs::path& dir) {
  std::istringstream in(csv);
  pipeline::save_artifact(pipeline::fit(in, lexicon, config), dir.string());
  const auto index = pipeline::make_index(pipeline::load_artifact(dir.string()));
  RunBytes out{artifact_bytes(dir), ""};
  for (const auto& q : queries) out.outputs += retrieval::to_json(retrieval::top_k_answers(q, 5, index)) + "\n";
  return out;
}

Outcome determinism() {
  const auto dir = scratch("determinism");
  const std::string table1 = slurp(kTable1);
  const auto crops = corpus::CropLexicon::from_file(kCrops);
  const std::vector<std::string> table1_queries{
      kGarlicQuery, "Control of pink bollworm of cotton", "Varieties of chilli"};

  synthetic::SyntheticOptions options;
  options.size = 300;
  options.templates = 6;
  const auto corpus = synthetic::make_synthetic_corpus(options);
  std::ostringstream csv;
  synthetic::write_csv(corpus, csv);
  std::vector<std::string> synth_queries;
  for (std::size_t i = 0; i < 10; ++i) synth_queries.push_back(corpus.records[i * 29].query_raw);
  pipeline::PipelineConfig synth_config;

  const auto a = fit_and_query(table1, crops, table1_config(), table1_queries, dir / "t1a");
  const auto b = fit_and_query(table1, crops, table1_config(), table1_queries, dir / "t1b");
  const auto c = fit_and_query(csv.str(), synthetic::lexicon_of(corpus), synth_config, synth_queries, dir / "sa");
  const auto d = fit_and_query(csv.str(), synthetic::lexicon_of(corpus), synth_config, synth_queries, dir / "sb");
  fs::remove_all(dir);
  const bool t1 = a.artifact == b.artifact && a.outputs == b.outputs;
  const bool syn = c.artifact == d.artifact && c.outputs == d.outputs;
  return {t1 && syn, std::string("table1_identical=") + (t1 ? "yes" : "no") +
                         " synthetic300_identical=" + (syn ? "yes" : "no")};
}

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {"cluster_oracle", oracle_equivalence},
      {"order_dependence", order_dependence},
      {"cluster_quality", quality_analogue},
      {"cluster_runtime", runtime_analogue},
      {"mapper_accuracy", mapper_analogue},
      {"gradient_check", gradient_check},
      {"metric_identities", metric_identities},
      {"ndcg_hand_case", ndcg_hand_case},
      {"end_to_end", end_to_end},
      {"determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<const Criterion*> selected;
  for (int i = 1; i < argc; ++i) {
    const auto& all = criteria();
    auto it = std::find_if(all.begin(), all.end(), [&](const Criterion& c) { return c.name == argv[i]; });
    if (it == all.end()) {
      std::cerr << "unknown criterion '" << argv[i] << "'; known:";
      for (const auto& c : all) std::cerr << " " << c.name;
      std::cerr << "\n";
      return 2;
    }
    selected.push_back(&*it);
  }
  if (selected.empty())
    for (const auto& c : criteria()) selected.push_back(&c);

  bool all_pass = true;
  for (const auto* c : selected) {
    Outcome o;
    try {
      o = c->run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    all_pass = all_pass && o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c->name << ": " << o.detail << std::endl;
  }
  return all_pass ? 0 : 1;
}
