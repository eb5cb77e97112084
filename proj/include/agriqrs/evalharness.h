#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "agriqrs/retrieval.h"

namespace agriqrs::evalharness {

struct ScoredRanking {
  std::vector<int> predicted;  // relevance in system order
  std::vector<int> ideal;      // same multiset, descending

  static ScoredRanking from_predicted(std::vector<int> predicted);
};

// DCG with gain 2^rel - 1 and discount log2(position + 1), positions from 1.
double dcg(const std::vector<int>& relevances);

// DCG(predicted) / DCG(ideal); 1 when the ideal has no gain. Throws
// ContractError for empty or non-permutation input or negative scores.
double ndcg(const ScoredRanking& ranking);

// Same ratio without the permutation requirement; used when the system may
// return answers outside the scored set.
double ndcg_against(const std::vector<int>& predicted,
                    const std::vector<int>& ideal);

// Mean over relevant positions of precision at that position; 0 when nothing
// is relevant. Entries must be 0 or 1.
double average_precision(const std::vector<int>& relevance);

// Mean AP. Throws MetricError on empty input.
double map_score(const std::vector<std::vector<int>>& relevance_lists);

std::vector<int> binarize(const std::vector<int>& scores);

struct ScoredAnswer {
  std::string answer;
  int score = 0;
};

struct ScoredQuery {
  std::string query;
  std::optional<std::string> crop;
  std::vector<ScoredAnswer> scored_answers;
};

// JSON Lines: {"query": s, "crop": s|null, "scored_answers": [{"answer": s,
// "score": 0-10}]}. Throws IngestError with the line number.
std::vector<ScoredQuery> load_scored_set(const std::string& path);
std::vector<ScoredQuery> load_scored_set(std::istream& in);

struct RetrievalRow {
  std::size_t k = 0;
  double mean_ndcg = 0.0;
  std::size_t queries_evaluated = 0;
  std::size_t queries_skipped = 0;
};

// Per k: NDCG of the returned answers' scores (unscored answers count 0)
// against the top k of the scored set. Queries with no scored answers, or
// that retrieval rejects, are skipped.
std::vector<RetrievalRow> evaluate_retrieval(
    const retrieval::FittedIndex& index, const std::vector<ScoredQuery>& set,
    const std::vector<std::size_t>& ks);

void write_retrieval_csv(std::ostream& out, const std::vector<RetrievalRow>& rows);

}  // namespace agriqrs::evalharness
