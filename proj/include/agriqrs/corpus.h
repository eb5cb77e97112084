#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace agriqrs::corpus {

// One cleaned corpus row.
struct CallRecord {
  std::size_t index = 0;  // dense ordinal after cleaning
  std::string crop;       // may be empty
  std::string query_raw;
  std::string answer_raw;

  friend bool operator==(const CallRecord&, const CallRecord&) = default;
};

// Two views of a query: a lexical token list for Jaccard and a full-context
// string for the sentence encoder. Both have every crop mention removed.
struct PreprocessedQuery {
  std::size_t record_index = 0;
  std::vector<std::string> tokens_lexical;
  std::string text_contextual;
  std::optional<std::string> detected_crop;

  friend bool operator==(const PreprocessedQuery&,
                         const PreprocessedQuery&) = default;
};

// Lowercased, single-spaced crop names. Names may span several tokens
// ("cotton kapas"), so matching works on token n-grams.
class CropLexicon {
 public:
  CropLexicon() = default;
  explicit CropLexicon(const std::vector<std::string>& names);

  static CropLexicon from_file(const std::string& path);

  // Normalizes and inserts; names that normalize to nothing are ignored.
  void add(std::string_view name);

  bool contains(std::string_view normalized_name) const {
    return crops_.count(std::string(normalized_name)) > 0;
  }
  const std::set<std::string>& crops() const { return crops_; }
  std::size_t max_ngram() const { return max_ngram_; }
  bool empty() const { return crops_.empty(); }

  static std::string normalize(std::string_view name);

 private:
  std::set<std::string> crops_;
  std::size_t max_ngram_ = 1;
};

struct CsvColumns {
  std::string crop = "Crop";
  std::string query = "QueryText";
  std::string answer = "KccAns";
};

struct CorpusConfig {
  std::set<std::string> stopwords;
  std::vector<std::string> realtime_keywords;  // lowercased phrases
  CsvColumns csv_columns;

  // Shipped stopword and realtime-keyword lists with the default columns.
  static CorpusConfig defaults();

  // Throws ConfigError on duplicate/empty column names.
  void validate() const;
};

// The shipped lists, one entry per element.
const std::vector<std::string>& default_stopwords();
const std::vector<std::string>& default_realtime_keywords();

enum class DropReason { kEmpty, kDuplicate, kRealtime, kEmptyAfterPreprocess };

std::string_view to_string(DropReason reason);

// `position` is the 1-based CSV line for ingestion drops and the record index
// for preprocessing drops.
struct Drop {
  DropReason reason;
  std::size_t position;
};

struct LoadResult {
  std::vector<CallRecord> records;
  std::vector<Drop> drops;
  std::size_t rows_read = 0;
};

// Field cleaning. Queries and crop names lose punctuation; answers keep their
// text and only have whitespace normalized.
std::string clean_query(std::string_view text);
std::string clean_crop(std::string_view text);
std::string clean_answer(std::string_view text);

// Applies field cleaning, drops empty and duplicate rows, reindexes densely.
// `positions`, when given, supplies the source line of each row for drop
// attribution.
LoadResult clean_rows(const std::vector<CallRecord>& rows,
                      const std::vector<std::size_t>* positions = nullptr);

LoadResult load_corpus(const std::string& path, const CorpusConfig& config);
LoadResult load_corpus(std::istream& in, const CorpusConfig& config);

struct CropMatch {
  std::string stripped;
  std::optional<std::string> crop;
};

// Longest n-gram first, left to right; the first lexicon hit is the detected
// crop and every occurrence of it is removed. The stripped text is returned
// lowercased and single-spaced.
CropMatch detect_and_strip_crop(std::string_view text,
                                const CropLexicon& lexicon);

bool is_realtime_query(std::string_view text, const CorpusConfig& config);

struct PreprocessOutcome {
  std::optional<PreprocessedQuery> query;
  std::optional<DropReason> dropped;  // set iff query is empty
};

// Shared by corpus preprocessing and user queries at retrieval time.
PreprocessOutcome preprocess_text(std::string_view text,
                                  const CropLexicon& lexicon,
                                  const CorpusConfig& config);

std::optional<PreprocessedQuery> preprocess_query(const CallRecord& record,
                                                  const CropLexicon& lexicon,
                                                  const CorpusConfig& config);

struct PreprocessResult {
  std::vector<PreprocessedQuery> queries;
  std::vector<Drop> drops;
};

PreprocessResult preprocess_corpus(const std::vector<CallRecord>& records,
                                   const CropLexicon& lexicon,
                                   const CorpusConfig& config);

// Stopword filter, Porter stem, and drop of stems that name a crop.
std::vector<std::string> lexical_tokens(const std::vector<std::string>& tokens,
                                        const CropLexicon& lexicon,
                                        const CorpusConfig& config);

}  // namespace agriqrs::corpus
