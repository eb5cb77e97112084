#include "agriqrs/evalharness.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <unordered_map>

#include <json.hpp>

#include "agriqrs/errors.h"
#include "agriqrs/text.h"

namespace agriqrs::evalharness {
namespace {

void check_scores(const std::vector<int>& v) {
  for (int s : v)
    if (s < 0) throw ContractError("relevance scores must be nonnegative");
}

}  // namespace

ScoredRanking ScoredRanking::from_predicted(std::vector<int> predicted) {
  ScoredRanking r;
  r.ideal = predicted;
  std::sort(r.ideal.begin(), r.ideal.end(), std::greater<>());
  r.predicted = std::move(predicted);
  return r;
}

double dcg(const std::vector<int>& relevances) {
  double total = 0.0;
  for (std::size_t i = 0; i < relevances.size(); ++i)
    total += (std::exp2(relevances[i]) - 1.0) /
             std::log2(static_cast<double>(i) + 2.0);
  return total;
}

double ndcg_against(const std::vector<int>& predicted,
                    const std::vector<int>& ideal) {
  check_scores(predicted);
  check_scores(ideal);
  const double idcg = dcg(ideal);
  if (idcg == 0.0) return 1.0;
  return dcg(predicted) / idcg;
}

double ndcg(const ScoredRanking& ranking) {
  if (ranking.predicted.empty()) throw ContractError("empty ranking");
  auto a = ranking.predicted;
  auto b = ranking.ideal;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b)
    throw ContractError("predicted relevances are not a permutation of ideal");
  if (!std::is_sorted(ranking.ideal.begin(), ranking.ideal.end(),
                      std::greater<>()))
    throw ContractError("ideal relevances must be descending");
  return ndcg_against(ranking.predicted, ranking.ideal);
}

double average_precision(const std::vector<int>& relevance) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (relevance[i] != 0 && relevance[i] != 1)
      throw ContractError("MAP relevance must be binary");
    if (relevance[i] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

double map_score(const std::vector<std::vector<int>>& relevance_lists) {
  if (relevance_lists.empty()) throw MetricError("MAP of no queries");
  double total = 0.0;
  for (const auto& r : relevance_lists) total += average_precision(r);
  return total / static_cast<double>(relevance_lists.size());
}

std::vector<int> binarize(const std::vector<int>& scores) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (int s : scores) out.push_back(s > 0 ? 1 : 0);
  return out;
}

std::vector<ScoredQuery> load_scored_set(std::istream& in) {
  std::vector<ScoredQuery> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::collapse_whitespace(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ScoredQuery q;
      q.query = j.at("query").get<std::string>();
      if (j.contains("crop") && !j.at("crop").is_null())
        q.crop = j.at("crop").get<std::string>();
      for (const auto& a : j.at("scored_answers")) {
        const auto& score = a.at("score");
        if (!score.is_number_integer())
          throw IngestError("score must be an integer", line_no);
        const int s = score.get<int>();
        if (s < 0 || s > 10) throw IngestError("score outside 0-10", line_no);
        q.scored_answers.push_back({a.at("answer").get<std::string>(), s});
      }
      out.push_back(std::move(q));
    } catch (const nlohmann::json::exception& e) {
      throw IngestError(std::string("malformed scored-set entry: ") + e.what(),
                        line_no);
    }
  }
  return out;
}

std::vector<ScoredQuery> load_scored_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open scored set " + path, 0);
  return load_scored_set(in);
}

std::vector<RetrievalRow> evaluate_retrieval(
    const retrieval::FittedIndex& index, const std::vector<ScoredQuery>& set,
    const std::vector<std::size_t>& ks) {
  std::vector<RetrievalRow> rows;
  for (std::size_t k : ks) {
    if (k < 1) throw ContractError("k must be at least 1");
    RetrievalRow row;
    row.k = k;
    double total = 0.0;
    for (const auto& q : set) {
      if (q.scored_answers.empty()) {
        ++row.queries_skipped;
        continue;
      }
      std::string text = q.query;
      if (q.crop && !text::contains_phrase(text::tokenize(q.query),
                                           text::tokenize(*q.crop)))
        text += " " + *q.crop;
      retrieval::RankedAnswers ranked;
      try {
        ranked = retrieval::top_k_answers(text, k, index);
      } catch (const QueryError&) {
        ++row.queries_skipped;
        continue;
      }
      std::unordered_map<std::string, int> score_of;
      std::vector<int> scored;
      for (const auto& a : q.scored_answers) {
        score_of.emplace(corpus::clean_answer(a.answer), a.score);
        scored.push_back(a.score);
      }
      std::stable_sort(scored.begin(), scored.end(), std::greater<>());
      if (scored.size() > k) scored.resize(k);
      std::vector<int> predicted;
      for (const auto& e : ranked.entries) {
        const auto it = score_of.find(corpus::clean_answer(e.answer));
        predicted.push_back(it == score_of.end() ? 0 : it->second);
      }
      total += ndcg_against(predicted, scored);
      ++row.queries_evaluated;
    }
    row.mean_ndcg = row.queries_evaluated
                        ? total / static_cast<double>(row.queries_evaluated)
                        : 0.0;
    rows.push_back(row);
  }
  return rows;
}

void write_retrieval_csv(std::ostream& out,
                         const std::vector<RetrievalRow>& rows) {
  out << "k,mean_ndcg,queries_evaluated,queries_skipped\n";
  for (const auto& r : rows)
    out << r.k << "," << std::setprecision(6) << std::fixed << r.mean_ndcg
        << std::defaultfloat << "," << r.queries_evaluated << ","
        << r.queries_skipped << "\n";
}

}  // namespace agriqrs::evalharness
