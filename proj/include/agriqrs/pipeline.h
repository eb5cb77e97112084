#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "agriqrs/classification_metrics.h"
#include "agriqrs/clustering.h"
#include "agriqrs/corpus.h"
#include "agriqrs/embed.h"
#include "agriqrs/mapper.h"
#include "agriqrs/retrieval.h"
#include "agriqrs/similarity.h"

namespace agriqrs::pipeline {

inline constexpr int kArtifactVersion = 1;

struct PipelineConfig {
  simcluster::ClusterParams cluster;
  retrieval::AnswerParams answers;
  embed::EmbedderSpec embedder;
  mapper::TrainConfig train;
  mapper::MapperKind mapper_kind = mapper::MapperKind::kLstm;
  corpus::CsvColumns columns;

  void validate() const;  // throws ConfigError

  nlohmann::ordered_json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig from_json(const nlohmann::json& j,
                                  const PipelineConfig& base);
};

// Reads a config file; either a bare config object or a manifest whose
// "config" member is used.
PipelineConfig load_config(const std::string& path);

struct FitStats {
  std::size_t rows_read = 0;
  std::size_t records = 0;
  std::size_t dropped_empty = 0;
  std::size_t dropped_duplicate = 0;
  std::size_t dropped_realtime = 0;
  std::size_t dropped_empty_after_preprocess = 0;
  std::size_t queries = 0;
  std::size_t clusters = 0;
  std::size_t clustered_queries = 0;
  std::size_t dropped_by_min_size = 0;
  double final_training_loss = 0.0;
  double training_accuracy = 0.0;
};

struct Artifact {
  PipelineConfig config;
  corpus::CorpusConfig corpus_config;
  corpus::CropLexicon lexicon;
  std::vector<corpus::CallRecord> records;
  std::vector<corpus::PreprocessedQuery> queries;
  simcluster::ClusterSet clusters;  // positions into `queries`
  mapper::MapperModel model;
  FitStats stats;
};

// Lexicon = crop file entries (if a path is given) plus the corpus crop
// column. Stage counts go to `log` when non-null. Throws FitError when fewer
// than two clusters form.
Artifact fit(const std::string& corpus_path, const std::string& lexicon_path,
             const PipelineConfig& config, std::ostream* log = nullptr);

Artifact fit(std::istream& corpus, const corpus::CropLexicon& base_lexicon,
             const PipelineConfig& config, std::ostream* log = nullptr);

// Lower-level entry after loading: everything from preprocessing on.
Artifact fit_records(const corpus::LoadResult& loaded,
                     const corpus::CropLexicon& lexicon,
                     const corpus::CorpusConfig& corpus_config,
                     const PipelineConfig& config, std::ostream* log = nullptr);

// Directory with manifest.json, records.jsonl, clusters.json, weights.bin.
void save_artifact(const Artifact& artifact, const std::string& dir);
Artifact load_artifact(const std::string& dir);

// Record indices of the members of each cluster.
std::vector<std::vector<std::size_t>> cluster_records(const Artifact& artifact);

// Embeddings of the preprocessed queries with the artifact's embedder.
std::vector<embed::EmbeddingVector> embed_queries(
    const Artifact& artifact, const embed::Embedder& embedder);

struct HoldoutResult {
  mapper::EvalReport report;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<double> epoch_losses;
};

// Stratified split of the clustered queries by config.train.train_fraction,
// a fresh mapper trained on the training side, scored on the rest.
HoldoutResult evaluate_holdout(const std::vector<embed::EmbeddingVector>& vectors,
                               const simcluster::ClusterSet& clusters,
                               const PipelineConfig& config);

retrieval::FittedIndex make_index(const Artifact& artifact);
retrieval::FittedIndex make_index(const Artifact& artifact,
                                  std::shared_ptr<const embed::Embedder> embedder);

}  // namespace agriqrs::pipeline
