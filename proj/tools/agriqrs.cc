// agriqrs: fit, query and evaluate the query-to-answer pipeline.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agriqrs/benchmark.h"
#include "agriqrs/classification_metrics.h"
#include "agriqrs/errors.h"
#include "agriqrs/evalharness.h"
#include "agriqrs/pipeline.h"
#include "agriqrs/retrieval.h"
#include "agriqrs/server.h"
#include "agriqrs/synthetic_corpus.h"

namespace {

using namespace agriqrs;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct Overrides {
  std::string config_path;
  std::optional<double> thresh;
  std::optional<double> lambda;
  std::optional<std::size_t> min_size;
  std::optional<std::string> embedder;
  std::optional<std::string> embed_path;
  std::optional<std::string> embed_endpoint;
  std::optional<std::size_t> dimension;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::string> mapper;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config (or an artifact manifest)");
    cmd->add_option("--thresh", thresh, "query clustering threshold");
    cmd->add_option("--lambda", lambda, "weight of embedding similarity");
    cmd->add_option("--min-size", min_size, "minimum query cluster size");
    cmd->add_option("--embedder", embedder, "hashed | file | service");
    cmd->add_option("--embed-path", embed_path, "JSONL vectors for the file embedder");
    cmd->add_option("--embed-endpoint", embed_endpoint, "base URL of the embedding service");
    cmd->add_option("--dim", dimension, "embedding dimension");
    cmd->add_option("--seed", seed, "training seed");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--mapper", mapper, "lstm | linear");
  }

  pipeline::PipelineConfig resolve() const {
    auto c = config_path.empty() ? pipeline::PipelineConfig{}
                                 : pipeline::load_config(config_path);
    if (thresh) c.cluster.thresh = *thresh;
    if (lambda) c.cluster.lambda = *lambda;
    if (min_size) c.cluster.min_size = *min_size;
    if (embedder) c.embedder.kind = embed::parse_embedder_kind(*embedder);
    if (embed_path) c.embedder.path = *embed_path;
    if (embed_endpoint) c.embedder.endpoint = *embed_endpoint;
    if (dimension) c.embedder.dimension = *dimension;
    if (seed) c.train.seed = *seed;
    if (epochs) c.train.epochs = *epochs;
    if (mapper) c.mapper_kind = mapper::parse_mapper_kind(*mapper);
    c.validate();
    return c;
  }
};

std::vector<std::size_t> parse_sizes(const std::string& list) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto item = list.substr(start, comma == std::string::npos ? std::string::npos
                                                                    : comma - start);
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw CLI::ValidationError("list", "expected comma-separated positive integers: " + list);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void print_answers(const retrieval::RankedAnswers& r, const std::string& format) {
  if (format == "table")
    std::cout << retrieval::to_table(r);
  else
    std::cout << retrieval::to_json(r) << "\n";
}

nlohmann::ordered_json report_json(const mapper::EvalReport& r) {
  nlohmann::ordered_json j;
  j["total"] = r.total;
  j["correct"] = r.correct;
  j["accuracy"] = r.accuracy;
  j["weighted_precision"] = r.weighted_precision;
  j["weighted_recall"] = r.weighted_recall;
  j["weighted_f1"] = r.weighted_f1;
  j["map"] = r.map;
  j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& c : r.per_class)
    j["per_class"].push_back({{"label", c.label},
                              {"support", c.support},
                              {"tp", c.true_positive},
                              {"fp", c.false_positive},
                              {"fn", c.false_negative}});
  j["top_confusions"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.confusions.size() && i < 10; ++i)
    j["top_confusions"].push_back({{"truth", r.confusions[i].truth},
                                   {"predicted", r.confusions[i].predicted},
                                   {"count", r.confusions[i].count}});
  return j;
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw Error("cannot write " + path, Error::Category::kRuntime);
  return file;
}

server::QueryServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agriqrs: query clustering and answer retrieval for farmer call logs"};
  app.require_subcommand(1);

  Overrides fit_opts;
  std::string corpus_path, crops_path, out_dir;
  auto* fit = app.add_subcommand("fit", "fit the pipeline on a CSV corpus");
  fit->add_option("corpus", corpus_path, "corpus CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--crops", crops_path, "crop lexicon, one name per line")
      ->check(CLI::ExistingFile);
  fit->add_option("--out", out_dir, "artifact directory")->required();
  fit_opts.attach(fit);

  std::string artifact_dir, query_text, format = "json";
  std::size_t k = 5;
  auto* query = app.add_subcommand("query", "answer one query");
  query->add_option("--artifact", artifact_dir)->required()->check(CLI::ExistingDirectory);
  query->add_option("--k", k, "answers to return")->check(CLI::PositiveNumber);
  query->add_option("--format", format)->check(CLI::IsMember({"json", "table"}));
  query->add_option("text", query_text, "query text")->required();

  auto* repl = app.add_subcommand("repl", "answer queries read one per line");
  repl->add_option("--artifact", artifact_dir)->required()->check(CLI::ExistingDirectory);
  repl->add_option("--k", k)->check(CLI::PositiveNumber);
  repl->add_option("--format", format)->check(CLI::IsMember({"json", "table"}));

  std::string bind = "127.0.0.1:8080";
  auto* serve = app.add_subcommand("serve", "serve POST /query and GET /health");
  serve->add_option("--artifact", artifact_dir)->required()->check(CLI::ExistingDirectory);
  serve->add_option("--bind", bind, "host:port");

  std::uint64_t seed = 42;
  std::string output;
  auto* eval_cluster =
      app.add_subcommand("eval-cluster", "silhouette/CH/DB of the artifact clustering vs K-Means");
  eval_cluster->add_option("--artifact", artifact_dir)->required()->check(CLI::ExistingDirectory);
  eval_cluster->add_option("--seed", seed, "K-Means seed");
  eval_cluster->add_option("--out", output, "CSV path (default stdout)");

  auto* eval_mapper =
      app.add_subcommand("eval-mapper", "train on a stratified split of the artifact clusters and score the rest");
  eval_mapper->add_option("--artifact", artifact_dir)->required()->check(CLI::ExistingDirectory);
  eval_mapper->add_option("--out", output, "JSON path (default stdout)");

  std::string scored_path, ks = "1,3,5";
  auto* eval_retrieval = app.add_subcommand("eval-retrieval", "mean NDCG against a scored set");
  eval_retrieval->add_option("--artifact", artifact_dir)->required()->check(CLI::ExistingDirectory);
  eval_retrieval->add_option("--scored", scored_path, "scored set (JSON Lines)")
      ->required()
      ->check(CLI::ExistingFile);
  eval_retrieval->add_option("--ks", ks, "comma-separated k values");
  eval_retrieval->add_option("--out", output, "CSV path (default stdout)");

  std::string sizes = "1000,2000,4000";
  Overrides bench_opts;
  auto* bench = app.add_subcommand("bench", "time threshold clustering vs K-Means on synthetic corpora");
  bench->add_option("--sizes", sizes, "ascending corpus sizes");
  bench->add_option("--bench-seed", seed, "corpus and K-Means seed");
  bench->add_option("--out", output, "CSV path (default stdout)");
  bench_opts.attach(bench);

  std::size_t synth_size = 2000;
  std::uint64_t synth_seed = 11;
  double noise = 0.1;
  std::string synth_crops;
  auto* synth = app.add_subcommand("synth", "write a synthetic templated corpus");
  synth->add_option("--size", synth_size)->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--noise", noise, "token noise rate")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--out", output, "CSV path (default stdout)");
  synth->add_option("--crops-out", synth_crops, "write the crop lexicon here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit) {
      const auto config = fit_opts.resolve();
      const auto artifact = pipeline::fit(corpus_path, crops_path, config, &std::cerr);
      pipeline::save_artifact(artifact, out_dir);
      std::cerr << "artifact: " << out_dir << "\n";
    } else if (*query) {
      const auto index = pipeline::make_index(pipeline::load_artifact(artifact_dir));
      print_answers(retrieval::top_k_answers(query_text, k, index), format);
    } else if (*repl) {
      const auto index = pipeline::make_index(pipeline::load_artifact(artifact_dir));
      std::string line;
      while (true) {
        std::cerr << "> " << std::flush;
        if (!std::getline(std::cin, line)) break;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          print_answers(retrieval::top_k_answers(line, k, index), format);
        } catch (const QueryError& e) {
          std::cerr << "notice: " << e.what() << "\n";
        }
        std::cout << std::flush;
      }
    } else if (*serve) {
      const auto [host, port] = server::parse_bind(bind);
      auto index = std::make_shared<const retrieval::FittedIndex>(
          pipeline::make_index(pipeline::load_artifact(artifact_dir)));
      server::QueryServer srv(index);
      const int bound = srv.bind(host, port);
      g_server = &srv;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << host << ":" << bound << "\n";
      srv.run();
      g_server = nullptr;
    } else if (*eval_cluster) {
      const auto artifact = pipeline::load_artifact(artifact_dir);
      const auto embedder = embed::make_embedder(artifact.config.embedder);
      const auto vectors = pipeline::embed_queries(artifact, *embedder);
      std::ofstream file;
      simcluster::write_benchmark_csv(
          simcluster::compare_with_kmeans(vectors, artifact.clusters, seed),
          open_output(output, file));
    } else if (*eval_mapper) {
      const auto artifact = pipeline::load_artifact(artifact_dir);
      const auto embedder = embed::make_embedder(artifact.config.embedder);
      const auto vectors = pipeline::embed_queries(artifact, *embedder);
      const auto result =
          pipeline::evaluate_holdout(vectors, artifact.clusters, artifact.config);
      auto j = report_json(result.report);
      j["train_size"] = result.train_size;
      j["test_size"] = result.test_size;
      j["epoch_losses"] = result.epoch_losses;
      std::ofstream file;
      open_output(output, file) << j.dump(2) << "\n";
    } else if (*eval_retrieval) {
      const auto index = pipeline::make_index(pipeline::load_artifact(artifact_dir));
      const auto rows = evalharness::evaluate_retrieval(
          index, evalharness::load_scored_set(scored_path), parse_sizes(ks));
      std::ofstream file;
      evalharness::write_retrieval_csv(open_output(output, file), rows);
    } else if (*bench) {
      const auto config = bench_opts.resolve();
      const auto rows = simcluster::benchmark_clustering(
          parse_sizes(sizes), config.cluster, seed, config.embedder.dimension);
      std::ofstream file;
      simcluster::write_benchmark_csv(rows, open_output(output, file));
    } else if (*synth) {
      synthetic::SyntheticOptions options;
      options.size = synth_size;
      options.seed = synth_seed;
      options.token_noise = noise;
      const auto corpus = synthetic::make_synthetic_corpus(options);
      std::ofstream file;
      synthetic::write_csv(corpus, open_output(output, file));
      if (!synth_crops.empty()) {
        std::ofstream crops(synth_crops);
        if (!crops) throw Error("cannot write " + synth_crops, Error::Category::kRuntime);
        for (const auto& c : corpus.crops) crops << c << "\n";
      }
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.category() == Error::Category::kData ? kExitData : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
