#include "agriqrs/retrieval.h"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "agriqrs/errors.h"
#include "agriqrs/text.h"

namespace agriqrs::retrieval {
namespace {

struct AnswerFeatures {
  std::vector<std::uint64_t> chars;  // sorted, unique
  std::vector<std::string> tokens;   // sorted, unique
};

template <typename T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
         c == U'\v' || c == 0xA0 || c == 0x2009 || c == 0x3000;
}

AnswerFeatures features(std::string_view answer, CharUnit unit) {
  AnswerFeatures f;
  const std::string lower = text::to_lower_ascii(answer);
  if (unit == CharUnit::kUnigram) {
    for (char32_t c : text::code_points(lower))
      if (!is_space(c)) f.chars.push_back(c);
  } else {
    std::vector<char32_t> run;
    auto flush = [&] {
      for (std::size_t i = 0; i + 1 < run.size(); ++i)
        f.chars.push_back((std::uint64_t{run[i]} << 32) | run[i + 1]);
      if (run.size() == 1) f.chars.push_back(std::uint64_t{run[0]} << 32);
      run.clear();
    };
    for (char32_t c : text::code_points(lower)) {
      if (is_space(c))
        flush();
      else
        run.push_back(c);
    }
    flush();
  }
  f.tokens = text::tokenize(answer);
  sort_unique(f.chars);
  sort_unique(f.tokens);
  return f;
}

double feature_similarity(const AnswerFeatures& a, const AnswerFeatures& b) {
  const double chars = simcluster::jaccard_sorted<std::uint64_t>(a.chars, b.chars);
  const double tokens = simcluster::jaccard_sorted<std::string>(a.tokens, b.tokens);
  return (chars + tokens) / 2.0;
}

}  // namespace

bool mentions_crop(const corpus::CallRecord& record, std::string_view crop) {
  const auto phrase = text::tokenize(crop);
  if (phrase.empty()) return false;
  return text::contains_phrase(text::tokenize(record.answer_raw), phrase) ||
         text::contains_phrase(text::tokenize(record.crop), phrase);
}

CandidateSelection select_candidates(
    const std::vector<corpus::CallRecord>& cluster_records,
    const std::optional<std::string>& crop) {
  CandidateSelection out;
  auto as_candidate = [](const corpus::CallRecord& r) {
    return Candidate{r.index, r.crop, r.query_raw, r.answer_raw};
  };
  if (crop) {
    for (const auto& r : cluster_records)
      if (mentions_crop(r, *crop)) out.candidates.push_back(as_candidate(r));
    if (!out.candidates.empty()) return out;
    out.fallback_unfiltered = true;
  }
  for (const auto& r : cluster_records) out.candidates.push_back(as_candidate(r));
  return out;
}

std::string to_string(CharUnit unit) {
  return unit == CharUnit::kUnigram ? "unigram" : "bigram";
}

CharUnit parse_char_unit(const std::string& name) {
  if (name == "unigram") return CharUnit::kUnigram;
  if (name == "bigram") return CharUnit::kBigram;
  throw ConfigError("unknown character unit '" + name + "'");
}

double answer_similarity(std::string_view a, std::string_view b, CharUnit unit) {
  return feature_similarity(features(a, unit), features(b, unit));
}

simcluster::SimilarityMatrix answer_similarity_matrix(
    const std::vector<std::string>& answers, CharUnit unit) {
  std::vector<AnswerFeatures> f;
  f.reserve(answers.size());
  for (const auto& a : answers) f.push_back(features(a, unit));
  simcluster::SimilarityMatrix sim(answers.size());
  for (std::size_t i = 0; i < answers.size(); ++i) {
    auto row = sim.upper_row(i);
    for (std::size_t j = i + 1; j < answers.size(); ++j)
      row[j - i - 1] = feature_similarity(f[i], f[j]);
  }
  return sim;
}

simcluster::ClusterSet cluster_answers(const std::vector<std::string>& answers,
                                       double thresh, std::size_t min_size,
                                       CharUnit unit) {
  return simcluster::threshold_cluster(answer_similarity_matrix(answers, unit),
                                       thresh, min_size);
}

std::vector<std::size_t> rank_clusters(const simcluster::ClusterSet& clusters) {
  const auto& c = clusters.clusters;
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (c[a].size() != c[b].size()) return c[a].size() > c[b].size();
    const std::size_t ma = c[a].empty() ? 0 : c[a].front();
    const std::size_t mb = c[b].empty() ? 0 : c[b].front();
    if (ma != mb) return ma < mb;
    return a < b;
  });
  return order;
}

std::size_t elect_leader(const std::vector<std::string>& members,
                         const std::set<std::string>& stopwords) {
  if (members.empty()) throw ContractError("cannot elect a leader of no members");
  std::size_t best = 0;
  std::size_t best_keywords = 0;
  std::size_t best_length = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    std::set<std::string> keywords;
    for (auto& t : text::tokenize(members[i]))
      if (!stopwords.count(t)) keywords.insert(std::move(t));
    const std::size_t length = text::code_points(members[i]).size();
    if (i == 0 || keywords.size() > best_keywords ||
        (keywords.size() == best_keywords && length > best_length)) {
      best = i;
      best_keywords = keywords.size();
      best_length = length;
    }
  }
  return best;
}

void AnswerParams::validate() const {
  if (!(thresh >= 0.0 && thresh <= 1.0))
    throw ConfigError("answer thresh must be in [0, 1]");
  if (min_size < 1) throw ConfigError("answer min_size must be at least 1");
}

RankedAnswers top_k_answers(std::string_view user_query, std::size_t k,
                            const FittedIndex& index) {
  if (k < 1) throw ContractError("k must be at least 1");
  const auto outcome =
      corpus::preprocess_text(user_query, index.lexicon, index.corpus_config);
  if (outcome.dropped == corpus::DropReason::kRealtime)
    throw UnsupportedQueryError(
        "real-time queries (market rates, weather) are not answered from the "
        "corpus");
  if (!outcome.query)
    throw QueryError("query has no content left after preprocessing");
  const auto& q = *outcome.query;

  const std::vector<std::string> texts{q.text_contextual};
  const auto vectors = index.embedder->embed_batch(texts);
  const auto prediction = mapper::predict_cluster(index.model, vectors.front());
  const std::size_t cluster_id = index.model.label_map.at(prediction.class_id);
  if (cluster_id >= index.clusters.size())
    throw ContractError("mapper predicted unknown cluster " +
                        std::to_string(cluster_id));

  std::vector<corpus::CallRecord> members;
  for (auto r : index.clusters[cluster_id]) members.push_back(index.records.at(r));
  const auto selection = select_candidates(members, q.detected_crop);

  std::vector<std::string> answers;
  for (const auto& c : selection.candidates) answers.push_back(c.answer);
  const auto clusters = cluster_answers(answers, index.answers.thresh,
                                        index.answers.min_size,
                                        index.answers.char_unit);

  RankedAnswers out;
  out.query = std::string(user_query);
  out.crop = q.detected_crop;
  out.cluster_id = cluster_id;
  out.fallback_unfiltered = selection.fallback_unfiltered;
  out.k_requested = k;
  for (auto c : rank_clusters(clusters)) {
    if (out.entries.size() == k) break;
    const auto& member_idx = clusters.clusters[c];
    std::vector<std::string> texts_in_cluster;
    for (auto m : member_idx) texts_in_cluster.push_back(answers[m]);
    const auto leader =
        member_idx[elect_leader(texts_in_cluster, index.corpus_config.stopwords)];
    const auto& cand = selection.candidates[leader];
    out.entries.push_back({out.entries.size() + 1, cand.crop, cand.source_query,
                           cand.answer, member_idx.size()});
  }
  return out;
}

std::string to_json(const RankedAnswers& answers) {
  nlohmann::ordered_json j;
  j["query"] = answers.query;
  j["crop"] = answers.crop ? nlohmann::ordered_json(*answers.crop)
                           : nlohmann::ordered_json(nullptr);
  j["cluster_id"] = answers.cluster_id;
  j["fallback_unfiltered"] = answers.fallback_unfiltered;
  j["answers"] = nlohmann::ordered_json::array();
  for (const auto& e : answers.entries) {
    nlohmann::ordered_json a;
    a["rank"] = e.rank;
    a["crop"] = e.crop;
    a["source_query"] = e.source_query;
    a["answer"] = e.answer;
    a["cluster_size"] = e.cluster_size;
    j["answers"].push_back(std::move(a));
  }
  return j.dump();
}

std::string to_table(const RankedAnswers& answers) {
  std::ostringstream out;
  out << "query: " << answers.query << "\n";
  out << "crop: " << (answers.crop ? *answers.crop : "-") << "\n";
  out << "cluster: " << answers.cluster_id;
  if (answers.fallback_unfiltered) out << " (no answers mention the crop; unfiltered)";
  out << "\n";
  out << "rank\tsize\tcrop\tsource query\tanswer\n";
  for (const auto& e : answers.entries)
    out << e.rank << "\t" << e.cluster_size << "\t" << e.crop << "\t"
        << e.source_query << "\t" << e.answer << "\n";
  return out.str();
}

}  // namespace agriqrs::retrieval
