#include "agriqrs/pipeline.h"

#include <bit>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <ostream>
#include <sstream>

#include "agriqrs/classification_metrics.h"
#include "agriqrs/errors.h"

namespace agriqrs::pipeline {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

void reject_unknown(const json& obj, std::initializer_list<const char*> keys,
                    const std::string& section) {
  if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known)
      throw ConfigError("unknown config key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string(), Error::Category::kRuntime);
  out << content;
  if (!out) throw Error("write failed for " + path.string(), Error::Category::kRuntime);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read artifact file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void put_f32(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_f32(const std::string& in, std::size_t offset) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b)
    bits |= std::uint32_t{static_cast<unsigned char>(in[offset + b])} << (8 * b);
  return static_cast<double>(std::bit_cast<float>(bits));
}

ordered_json stats_json(const FitStats& s) {
  ordered_json j;
  j["rows_read"] = s.rows_read;
  j["records"] = s.records;
  j["dropped_empty"] = s.dropped_empty;
  j["dropped_duplicate"] = s.dropped_duplicate;
  j["dropped_realtime"] = s.dropped_realtime;
  j["dropped_empty_after_preprocess"] = s.dropped_empty_after_preprocess;
  j["queries"] = s.queries;
  j["clusters"] = s.clusters;
  j["clustered_queries"] = s.clustered_queries;
  j["dropped_by_min_size"] = s.dropped_by_min_size;
  j["final_training_loss"] = s.final_training_loss;
  j["training_accuracy"] = s.training_accuracy;
  return j;
}

FitStats stats_from_json(const json& j) {
  FitStats s;
  read(j, "rows_read", s.rows_read);
  read(j, "records", s.records);
  read(j, "dropped_empty", s.dropped_empty);
  read(j, "dropped_duplicate", s.dropped_duplicate);
  read(j, "dropped_realtime", s.dropped_realtime);
  read(j, "dropped_empty_after_preprocess", s.dropped_empty_after_preprocess);
  read(j, "queries", s.queries);
  read(j, "clusters", s.clusters);
  read(j, "clustered_queries", s.clustered_queries);
  read(j, "dropped_by_min_size", s.dropped_by_min_size);
  read(j, "final_training_loss", s.final_training_loss);
  read(j, "training_accuracy", s.training_accuracy);
  return s;
}

}  // namespace

void PipelineConfig::validate() const {
  cluster.validate();
  answers.validate();
  embedder.validate();
  train.validate();
  corpus::CorpusConfig c;
  c.csv_columns = columns;
  c.validate();
}

ordered_json PipelineConfig::to_json() const {
  ordered_json j;
  j["cluster"] = {{"lambda", cluster.lambda},
                  {"thresh", cluster.thresh},
                  {"min_size", cluster.min_size}};
  j["answers"] = {{"thresh", answers.thresh},
                  {"min_size", answers.min_size},
                  {"char_unit", retrieval::to_string(answers.char_unit)}};
  j["embedder"] = {{"kind", embed::to_string(embedder.kind)},
                   {"dimension", embedder.dimension},
                   {"seed", embedder.seed},
                   {"path", embedder.path},
                   {"endpoint", embedder.endpoint}};
  j["mapper"] = {{"kind", mapper::to_string(mapper_kind)},
                 {"learning_rate", train.learning_rate},
                 {"batch_size", train.batch_size},
                 {"epochs", train.epochs},
                 {"dropout", train.dropout},
                 {"beta1", train.beta1},
                 {"beta2", train.beta2},
                 {"epsilon", train.epsilon},
                 {"seed", train.seed},
                 {"train_fraction", train.train_fraction},
                 {"hidden1", train.hidden1},
                 {"hidden2", train.hidden2}};
  j["columns"] = {{"crop", columns.crop},
                  {"query", columns.query},
                  {"answer", columns.answer}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  return from_json(j, PipelineConfig{});
}

PipelineConfig PipelineConfig::from_json(const json& j,
                                         const PipelineConfig& base) {
  PipelineConfig c = base;
  try {
    reject_unknown(j, {"cluster", "answers", "embedder", "mapper", "columns"},
                   "config");
    if (j.contains("cluster")) {
      const auto& s = j.at("cluster");
      reject_unknown(s, {"lambda", "thresh", "min_size"}, "cluster");
      read(s, "lambda", c.cluster.lambda);
      read(s, "thresh", c.cluster.thresh);
      read(s, "min_size", c.cluster.min_size);
    }
    if (j.contains("answers")) {
      const auto& s = j.at("answers");
      reject_unknown(s, {"thresh", "min_size", "char_unit"}, "answers");
      read(s, "thresh", c.answers.thresh);
      read(s, "min_size", c.answers.min_size);
      if (s.contains("char_unit"))
        c.answers.char_unit =
            retrieval::parse_char_unit(s.at("char_unit").get<std::string>());
    }
    if (j.contains("embedder")) {
      const auto& s = j.at("embedder");
      reject_unknown(s, {"kind", "dimension", "seed", "path", "endpoint"},
                     "embedder");
      if (s.contains("kind"))
        c.embedder.kind = embed::parse_embedder_kind(s.at("kind").get<std::string>());
      read(s, "dimension", c.embedder.dimension);
      read(s, "seed", c.embedder.seed);
      read(s, "path", c.embedder.path);
      read(s, "endpoint", c.embedder.endpoint);
    }
    if (j.contains("mapper")) {
      const auto& s = j.at("mapper");
      reject_unknown(s,
                     {"kind", "learning_rate", "batch_size", "epochs", "dropout",
                      "beta1", "beta2", "epsilon", "seed", "train_fraction",
                      "hidden1", "hidden2"},
                     "mapper");
      if (s.contains("kind"))
        c.mapper_kind = mapper::parse_mapper_kind(s.at("kind").get<std::string>());
      read(s, "learning_rate", c.train.learning_rate);
      read(s, "batch_size", c.train.batch_size);
      read(s, "epochs", c.train.epochs);
      read(s, "dropout", c.train.dropout);
      read(s, "beta1", c.train.beta1);
      read(s, "beta2", c.train.beta2);
      read(s, "epsilon", c.train.epsilon);
      read(s, "seed", c.train.seed);
      read(s, "train_fraction", c.train.train_fraction);
      read(s, "hidden1", c.train.hidden1);
      read(s, "hidden2", c.train.hidden2);
    }
    if (j.contains("columns")) {
      const auto& s = j.at("columns");
      reject_unknown(s, {"crop", "query", "answer"}, "columns");
      read(s, "crop", c.columns.crop);
      read(s, "query", c.columns.query);
      read(s, "answer", c.columns.answer);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  if (j.is_object() && j.contains("format") && j.contains("config"))
    return PipelineConfig::from_json(j.at("config"));
  return PipelineConfig::from_json(j);
}

Artifact fit_records(const corpus::LoadResult& loaded,
                     const corpus::CropLexicon& lexicon,
                     const corpus::CorpusConfig& corpus_config,
                     const PipelineConfig& config, std::ostream* log) {
  config.validate();
  Timer total;
  Artifact a;
  a.config = config;
  a.corpus_config = corpus_config;
  a.lexicon = lexicon;
  a.records = loaded.records;
  a.stats.rows_read = loaded.rows_read;
  a.stats.records = loaded.records.size();
  for (const auto& d : loaded.drops) {
    if (d.reason == corpus::DropReason::kEmpty) ++a.stats.dropped_empty;
    if (d.reason == corpus::DropReason::kDuplicate) ++a.stats.dropped_duplicate;
  }
  if (log)
    *log << "load: rows=" << a.stats.rows_read << " records=" << a.stats.records
         << " dropped_empty=" << a.stats.dropped_empty
         << " dropped_duplicate=" << a.stats.dropped_duplicate << "\n";

  auto prep = corpus::preprocess_corpus(a.records, lexicon, corpus_config);
  a.queries = std::move(prep.queries);
  for (const auto& d : prep.drops) {
    if (d.reason == corpus::DropReason::kRealtime) ++a.stats.dropped_realtime;
    if (d.reason == corpus::DropReason::kEmptyAfterPreprocess)
      ++a.stats.dropped_empty_after_preprocess;
  }
  a.stats.queries = a.queries.size();
  if (log)
    *log << "preprocess: queries=" << a.stats.queries
         << " dropped_realtime=" << a.stats.dropped_realtime
         << " dropped_empty=" << a.stats.dropped_empty_after_preprocess << "\n";

  const auto embedder = embed::make_embedder(config.embedder);
  const auto vectors = embed_queries(a, *embedder);
  const auto sim =
      simcluster::query_similarity_matrix(a.queries, vectors, config.cluster);
  a.clusters = simcluster::threshold_cluster(sim, config.cluster.thresh,
                                             config.cluster.min_size);
  a.stats.clusters = a.clusters.clusters.size();
  a.stats.dropped_by_min_size = a.clusters.dropped.size();
  for (const auto& c : a.clusters.clusters) a.stats.clustered_queries += c.size();
  if (log)
    *log << "cluster: clusters=" << a.stats.clusters
         << " clustered_queries=" << a.stats.clustered_queries
         << " dropped_by_min_size=" << a.stats.dropped_by_min_size << "\n";
  if (a.stats.clusters < 2)
    throw FitError("only " + std::to_string(a.stats.clusters) +
                   " cluster(s) formed; at least 2 are needed to train the "
                   "mapper (try lowering --thresh or --min-size)");

  std::vector<mapper::LabeledExample> examples;
  for (std::size_t c = 0; c < a.clusters.clusters.size(); ++c)
    for (auto q : a.clusters.clusters[c]) examples.push_back({vectors[q], c});
  auto trained = mapper::train_mapper(examples, config.train, config.mapper_kind);
  a.model = std::move(trained.model);
  a.stats.final_training_loss = trained.epoch_losses.back();
  a.stats.training_accuracy = mapper::evaluate_mapper(a.model, examples).accuracy;
  if (log)
    *log << "train: examples=" << examples.size()
         << " classes=" << a.model.dims.classes
         << " final_loss=" << a.stats.final_training_loss
         << " train_accuracy=" << a.stats.training_accuracy << "\n"
         << "fit: " << total.seconds() << " s\n";
  return a;
}

Artifact fit(std::istream& corpus_in, const corpus::CropLexicon& base_lexicon,
             const PipelineConfig& config, std::ostream* log) {
  config.validate();
  auto corpus_config = corpus::CorpusConfig::defaults();
  corpus_config.csv_columns = config.columns;
  const auto loaded = corpus::load_corpus(corpus_in, corpus_config);
  corpus::CropLexicon lexicon = base_lexicon;
  for (const auto& r : loaded.records)
    if (!r.crop.empty()) lexicon.add(r.crop);
  return fit_records(loaded, lexicon, corpus_config, config, log);
}

Artifact fit(const std::string& corpus_path, const std::string& lexicon_path,
             const PipelineConfig& config, std::ostream* log) {
  std::ifstream in(corpus_path, std::ios::binary);
  if (!in) throw IngestError("cannot open corpus " + corpus_path, 0);
  const corpus::CropLexicon lexicon = lexicon_path.empty()
                                          ? corpus::CropLexicon()
                                          : corpus::CropLexicon::from_file(lexicon_path);
  return fit(in, lexicon, config, log);
}

std::vector<embed::EmbeddingVector> embed_queries(const Artifact& artifact,
                                                  const embed::Embedder& embedder) {
  std::vector<std::string> texts;
  texts.reserve(artifact.queries.size());
  for (const auto& q : artifact.queries) texts.push_back(q.text_contextual);
  return embedder.embed_batch(texts);
}

std::vector<std::vector<std::size_t>> cluster_records(const Artifact& artifact) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& c : artifact.clusters.clusters) {
    std::vector<std::size_t> members;
    for (auto q : c) members.push_back(artifact.queries.at(q).record_index);
    out.push_back(std::move(members));
  }
  return out;
}

void save_artifact(const Artifact& a, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create artifact directory " + dir, Error::Category::kRuntime);

  std::string weights;
  ordered_json tensors = ordered_json::array();
  for (const auto& t : a.model.tensors) {
    tensors.push_back({{"name", t.name},
                       {"shape", {t.value.rows(), t.value.cols()}},
                       {"offset", weights.size()}});
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) put_f32(weights, t.value(r, c));
  }

  ordered_json manifest;
  manifest["format"] = "agriqrs-artifact";
  manifest["version"] = kArtifactVersion;
  manifest["config"] = a.config.to_json();
  manifest["stopwords"] = a.corpus_config.stopwords;
  manifest["realtime_keywords"] = a.corpus_config.realtime_keywords;
  manifest["lexicon"] = a.lexicon.crops();
  manifest["stats"] = stats_json(a.stats);
  manifest["mapper"] = {{"kind", mapper::to_string(a.model.kind)},
                        {"input", a.model.dims.input},
                        {"hidden1", a.model.dims.hidden1},
                        {"hidden2", a.model.dims.hidden2},
                        {"classes", a.model.dims.classes},
                        {"dropout", a.model.dropout},
                        {"label_map", a.model.label_map},
                        {"weights_bytes", weights.size()},
                        {"tensors", tensors}};

  std::map<std::size_t, const corpus::PreprocessedQuery*> by_record;
  for (const auto& q : a.queries) by_record[q.record_index] = &q;
  std::string records;
  for (const auto& r : a.records) {
    ordered_json j;
    j["index"] = r.index;
    j["crop"] = r.crop;
    j["query"] = r.query_raw;
    j["answer"] = r.answer_raw;
    const auto it = by_record.find(r.index);
    if (it == by_record.end()) {
      j["preprocessed"] = nullptr;
    } else {
      const auto& q = *it->second;
      j["preprocessed"] = {
          {"tokens_lexical", q.tokens_lexical},
          {"text_contextual", q.text_contextual},
          {"detected_crop", q.detected_crop ? ordered_json(*q.detected_crop)
                                            : ordered_json(nullptr)}};
    }
    records += j.dump() + "\n";
  }

  ordered_json clusters;
  clusters["clusters"] = cluster_records(a);
  std::vector<std::size_t> dropped;
  for (auto q : a.clusters.dropped) dropped.push_back(a.queries.at(q).record_index);
  clusters["dropped"] = dropped;

  const fs::path root(dir);
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  write_text(root / "records.jsonl", records);
  write_text(root / "clusters.json", clusters.dump() + "\n");
  write_text(root / "weights.bin", weights);
}

Artifact load_artifact(const std::string& dir) {
  const fs::path root(dir);
  Artifact a;
  try {
    const json manifest = json::parse(read_text(root / "manifest.json"));
    if (manifest.value("format", "") != "agriqrs-artifact")
      throw ContractError(dir + " is not an agriqrs artifact");
    if (manifest.at("version").get<int>() != kArtifactVersion)
      throw ContractError("unsupported artifact version " +
                          manifest.at("version").dump());
    a.config = PipelineConfig::from_json(manifest.at("config"));
    for (const auto& s : manifest.at("stopwords"))
      a.corpus_config.stopwords.insert(s.get<std::string>());
    a.corpus_config.realtime_keywords =
        manifest.at("realtime_keywords").get<std::vector<std::string>>();
    a.corpus_config.csv_columns = a.config.columns;
    for (const auto& c : manifest.at("lexicon")) a.lexicon.add(c.get<std::string>());
    a.stats = stats_from_json(manifest.at("stats"));

    const auto& m = manifest.at("mapper");
    mapper::MapperDims dims;
    dims.input = m.at("input").get<std::size_t>();
    dims.hidden1 = m.at("hidden1").get<std::size_t>();
    dims.hidden2 = m.at("hidden2").get<std::size_t>();
    dims.classes = m.at("classes").get<std::size_t>();
    a.model = mapper::MapperModel::zeros(
        mapper::parse_mapper_kind(m.at("kind").get<std::string>()), dims,
        m.at("dropout").get<double>());
    a.model.label_map = m.at("label_map").get<std::vector<std::size_t>>();
    const std::string weights = read_text(root / "weights.bin");
    if (weights.size() != m.at("weights_bytes").get<std::size_t>())
      throw ContractError("weights.bin size does not match the manifest");
    const auto& tensors = m.at("tensors");
    if (tensors.size() != a.model.tensors.size())
      throw ContractError("manifest tensor count does not match the mapper kind");
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      auto& tensor = a.model.tensors[t];
      const auto& entry = tensors[t];
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (entry.at("name").get<std::string>() != tensor.name || shape.size() != 2 ||
          shape[0] != static_cast<std::size_t>(tensor.value.rows()) ||
          shape[1] != static_cast<std::size_t>(tensor.value.cols()))
        throw ContractError("tensor index entry " + std::to_string(t) +
                            " does not match the mapper layout");
      std::size_t offset = entry.at("offset").get<std::size_t>();
      if (offset + 4 * static_cast<std::size_t>(tensor.value.size()) > weights.size())
        throw ContractError("tensor '" + tensor.name + "' runs past weights.bin");
      for (Eigen::Index r = 0; r < tensor.value.rows(); ++r)
        for (Eigen::Index c = 0; c < tensor.value.cols(); ++c, offset += 4)
          tensor.value(r, c) = get_f32(weights, offset);
    }
    a.model.validate();

    std::istringstream records(read_text(root / "records.jsonl"));
    std::string line;
    std::map<std::size_t, std::size_t> query_of_record;
    while (std::getline(records, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      corpus::CallRecord r;
      r.index = j.at("index").get<std::size_t>();
      r.crop = j.at("crop").get<std::string>();
      r.query_raw = j.at("query").get<std::string>();
      r.answer_raw = j.at("answer").get<std::string>();
      if (r.index != a.records.size())
        throw ContractError("records.jsonl indices are not dense");
      const auto& p = j.at("preprocessed");
      if (!p.is_null()) {
        corpus::PreprocessedQuery q;
        q.record_index = r.index;
        q.tokens_lexical = p.at("tokens_lexical").get<std::vector<std::string>>();
        q.text_contextual = p.at("text_contextual").get<std::string>();
        if (!p.at("detected_crop").is_null())
          q.detected_crop = p.at("detected_crop").get<std::string>();
        query_of_record[r.index] = a.queries.size();
        a.queries.push_back(std::move(q));
      }
      a.records.push_back(std::move(r));
    }

    const json clusters = json::parse(read_text(root / "clusters.json"));
    auto to_query = [&](std::size_t record) {
      const auto it = query_of_record.find(record);
      if (it == query_of_record.end())
        throw ContractError("cluster member " + std::to_string(record) +
                            " has no preprocessed query");
      return it->second;
    };
    for (const auto& c : clusters.at("clusters")) {
      std::vector<std::size_t> members;
      for (const auto& r : c) members.push_back(to_query(r.get<std::size_t>()));
      a.clusters.clusters.push_back(std::move(members));
    }
    for (const auto& r : clusters.at("dropped"))
      a.clusters.dropped.push_back(to_query(r.get<std::size_t>()));
  } catch (const json::exception& e) {
    throw ContractError("corrupt artifact in " + dir + ": " + e.what());
  }
  if (a.clusters.clusters.size() != a.model.dims.classes)
    throw ContractError("artifact cluster count does not match mapper classes");
  return a;
}

HoldoutResult evaluate_holdout(const std::vector<embed::EmbeddingVector>& vectors,
                               const simcluster::ClusterSet& clusters,
                               const PipelineConfig& config) {
  std::vector<mapper::LabeledExample> examples;
  for (std::size_t c = 0; c < clusters.clusters.size(); ++c)
    for (auto q : clusters.clusters[c]) examples.push_back({vectors.at(q), c});
  auto [train, test] = mapper::split_dataset(examples, config.train.train_fraction,
                                             config.train.seed);
  auto trained = mapper::train_mapper(train, config.train, config.mapper_kind);
  HoldoutResult out;
  out.report = mapper::evaluate_mapper(trained.model, test);
  out.train_size = train.size();
  out.test_size = test.size();
  out.epoch_losses = std::move(trained.epoch_losses);
  return out;
}

retrieval::FittedIndex make_index(const Artifact& artifact,
                                  std::shared_ptr<const embed::Embedder> embedder) {
  if (embedder->dimension() != artifact.model.dims.input)
    throw ConfigError("embedder dimension " + std::to_string(embedder->dimension()) +
                      " does not match the mapper input " +
                      std::to_string(artifact.model.dims.input));
  retrieval::FittedIndex index;
  index.corpus_config = artifact.corpus_config;
  index.lexicon = artifact.lexicon;
  index.records = artifact.records;
  index.clusters = cluster_records(artifact);
  index.model = artifact.model;
  index.embedder = std::move(embedder);
  index.answers = artifact.config.answers;
  return index;
}

retrieval::FittedIndex make_index(const Artifact& artifact) {
  return make_index(artifact, embed::make_embedder(artifact.config.embedder));
}

}  // namespace agriqrs::pipeline
