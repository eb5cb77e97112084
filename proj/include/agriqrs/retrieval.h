#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "agriqrs/clustering.h"
#include "agriqrs/corpus.h"
#include "agriqrs/embed.h"
#include "agriqrs/mapper.h"

namespace agriqrs::retrieval {

struct Candidate {
  std::size_t record_index = 0;
  std::string crop;
  std::string source_query;
  std::string answer;
};

struct CandidateSelection {
  std::vector<Candidate> candidates;
  // A crop was given but matched nothing; `candidates` is the unfiltered list.
  bool fallback_unfiltered = false;
};

// True when `crop` occurs on token boundaries in the answer or the record's
// crop field.
bool mentions_crop(const corpus::CallRecord& record, std::string_view crop);

CandidateSelection select_candidates(
    const std::vector<corpus::CallRecord>& cluster_records,
    const std::optional<std::string>& crop);

enum class CharUnit { kUnigram, kBigram };

std::string to_string(CharUnit unit);
CharUnit parse_char_unit(const std::string& name);

// Mean of the character-set Jaccard and the token-set Jaccard. Characters are
// lowercased code points, whitespace excluded; bigrams are taken inside
// tokens.
double answer_similarity(std::string_view a, std::string_view b,
                         CharUnit unit = CharUnit::kUnigram);

simcluster::SimilarityMatrix answer_similarity_matrix(
    const std::vector<std::string>& answers, CharUnit unit);

simcluster::ClusterSet cluster_answers(const std::vector<std::string>& answers,
                                       double thresh, std::size_t min_size,
                                       CharUnit unit = CharUnit::kUnigram);

// Cluster positions by descending size; ties by smallest member, then by
// position.
std::vector<std::size_t> rank_clusters(const simcluster::ClusterSet& clusters);

// Member with the most unique non-stopword tokens; ties go to the longer text
// (code points), then the lower index.
std::size_t elect_leader(const std::vector<std::string>& members,
                         const std::set<std::string>& stopwords);

struct AnswerParams {
  double thresh = 0.6;
  std::size_t min_size = 1;
  CharUnit char_unit = CharUnit::kUnigram;

  void validate() const;  // throws ConfigError
};

// Everything retrieval reads from a fitted pipeline.
struct FittedIndex {
  corpus::CorpusConfig corpus_config;
  corpus::CropLexicon lexicon;
  std::vector<corpus::CallRecord> records;
  std::vector<std::vector<std::size_t>> clusters;  // record indices per id
  mapper::MapperModel model;
  std::shared_ptr<const embed::Embedder> embedder;
  AnswerParams answers;
};

struct RankedEntry {
  std::size_t rank = 0;
  std::string crop;
  std::string source_query;
  std::string answer;
  std::size_t cluster_size = 0;
  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

struct RankedAnswers {
  std::string query;
  std::optional<std::string> crop;
  std::size_t cluster_id = 0;
  bool fallback_unfiltered = false;
  std::vector<RankedEntry> entries;
  std::size_t k_requested = 0;
  std::size_t k_returned() const { return entries.size(); }
  friend bool operator==(const RankedAnswers&, const RankedAnswers&) = default;
};

// Throws UnsupportedQueryError for realtime queries, QueryError when nothing
// is left after preprocessing, ContractError for k < 1.
RankedAnswers top_k_answers(std::string_view user_query, std::size_t k,
                            const FittedIndex& index);

// Compact JSON in the documented key order.
std::string to_json(const RankedAnswers& answers);
std::string to_table(const RankedAnswers& answers);

}  // namespace agriqrs::retrieval
