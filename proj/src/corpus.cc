#include "agriqrs/corpus.h"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "agriqrs/errors.h"
#include "agriqrs/porter_stemmer.h"
#include "agriqrs/text.h"

namespace agriqrs::corpus {

namespace detail {
extern const char* const kStopwordsData;
extern const char* const kRealtimeKeywordsData;
}  // namespace detail

namespace {

std::vector<std::string> parse_list(const char* data) {
  std::vector<std::string> out;
  std::istringstream in(data);
  std::string line;
  while (std::getline(in, line)) {
    auto entry = text::collapse_whitespace(line);
    if (!entry.empty() && entry.front() != '#') out.push_back(std::move(entry));
  }
  return out;
}

// Minimal RFC 4180 reader: quoted fields, doubled quotes, embedded newlines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Reads the next record; returns false at end of input. record_line() is
  // the physical line the record started on.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.peek();
    // Skip fully blank lines between records.
    while (c == '\n' || c == '\r') {
      in_.get();
      if (c == '\n') ++line_;
      c = in_.peek();
    }
    if (c == EOF) return false;
    record_line_ = line_;

    std::string field;
    bool quoted = false;
    bool field_was_quoted = false;
    while (true) {
      c = in_.get();
      if (c == EOF) {
        if (quoted) throw IngestError("unterminated quoted field", record_line_);
        fields.push_back(std::move(field));
        return true;
      }
      const char ch = static_cast<char>(c);
      if (quoted) {
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (ch == '\n') ++line_;
          field.push_back(ch);
        }
        continue;
      }
      if (ch == '"' && field.empty() && !field_was_quoted) {
        quoted = true;
        field_was_quoted = true;
      } else if (ch == ',') {
        fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
      } else if (ch == '\r') {
        if (in_.peek() == '\n') continue;
        ++line_;
        fields.push_back(std::move(field));
        return true;
      } else if (ch == '\n') {
        ++line_;
        fields.push_back(std::move(field));
        return true;
      } else {
        if (field_was_quoted) {
          throw IngestError("unexpected character after closing quote",
                            line_);
        }
        field.push_back(ch);
      }
    }
  }

  std::size_t record_line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 1;
};

std::size_t find_column(const std::vector<std::string>& header,
                        const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (text::collapse_whitespace(header[i]) == name) return i;
  }
  throw ConfigError("missing column '" + name + "' in corpus header");
}

// Removes every contiguous occurrence of `phrase` from `tokens`.
std::vector<std::string> remove_phrase(const std::vector<std::string>& tokens,
                                       const std::vector<std::string>& phrase) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool match = i + phrase.size() <= tokens.size();
    for (std::size_t k = 0; match && k < phrase.size(); ++k) {
      match = tokens[i + k] == phrase[k];
    }
    if (match) {
      i += phrase.size();
    } else {
      out.push_back(tokens[i++]);
    }
  }
  return out;
}

// First lexicon n-gram in longest-first, left-to-right order.
std::optional<std::string> find_crop(const std::vector<std::string>& tokens,
                                     const CropLexicon& lexicon) {
  if (lexicon.empty()) return std::nullopt;
  const std::size_t longest = std::min(lexicon.max_ngram(), tokens.size());
  for (std::size_t n = longest; n >= 1; --n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string gram = tokens[i];
      for (std::size_t k = 1; k < n; ++k) {
        gram.push_back(' ');
        gram.append(tokens[i + k]);
      }
      if (lexicon.contains(gram)) return gram;
    }
  }
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------
// CropLexicon

CropLexicon::CropLexicon(const std::vector<std::string>& names) {
  for (const auto& name : names) add(name);
}

CropLexicon CropLexicon::from_file(const std::string& path) {
  return CropLexicon(text::read_lines(path));
}

std::string CropLexicon::normalize(std::string_view name) {
  return text::join(text::tokenize(name), " ");
}

void CropLexicon::add(std::string_view name) {
  auto normalized = normalize(name);
  if (normalized.empty()) return;
  const auto ngram = text::tokenize(normalized).size();
  max_ngram_ = std::max(max_ngram_, ngram);
  crops_.insert(std::move(normalized));
}

// ---------------------------------------------------------------------------
// Config

const std::vector<std::string>& default_stopwords() {
  static const auto list = parse_list(detail::kStopwordsData);
  return list;
}

const std::vector<std::string>& default_realtime_keywords() {
  static const auto list = parse_list(detail::kRealtimeKeywordsData);
  return list;
}

CorpusConfig CorpusConfig::defaults() {
  CorpusConfig config;
  for (const auto& w : default_stopwords()) config.stopwords.insert(w);
  for (const auto& k : default_realtime_keywords()) {
    config.realtime_keywords.push_back(text::join(text::tokenize(k), " "));
  }
  return config;
}

void CorpusConfig::validate() const {
  const auto& c = csv_columns;
  if (c.crop.empty() || c.query.empty() || c.answer.empty()) {
    throw ConfigError("csv column names must be non-empty");
  }
  if (c.crop == c.query || c.crop == c.answer || c.query == c.answer) {
    throw ConfigError("csv column names must be distinct");
  }
  for (const auto& k : realtime_keywords) {
    if (k != text::to_lower_ascii(k)) {
      throw ConfigError("realtime keyword not lowercased: " + k);
    }
  }
}

std::string_view to_string(DropReason reason) {
  switch (reason) {
    case DropReason::kEmpty:
      return "empty";
    case DropReason::kDuplicate:
      return "duplicate";
    case DropReason::kRealtime:
      return "realtime";
    case DropReason::kEmptyAfterPreprocess:
      return "empty-after-preprocess";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Cleaning and ingestion

std::string clean_query(std::string_view text) {
  return text::strip_special(text);
}

std::string clean_crop(std::string_view text) {
  return text::strip_special(text);
}

std::string clean_answer(std::string_view text) {
  return text::collapse_whitespace(text);
}

LoadResult clean_rows(const std::vector<CallRecord>& rows,
                      const std::vector<std::size_t>* positions) {
  LoadResult result;
  result.rows_read = rows.size();
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t position = positions ? (*positions)[r] : r;
    CallRecord rec;
    rec.crop = clean_crop(rows[r].crop);
    rec.query_raw = clean_query(rows[r].query_raw);
    rec.answer_raw = clean_answer(rows[r].answer_raw);
    if (rec.query_raw.empty() || rec.answer_raw.empty()) {
      result.drops.push_back({DropReason::kEmpty, position});
      continue;
    }
    if (!seen.emplace(rec.crop, rec.query_raw, rec.answer_raw).second) {
      result.drops.push_back({DropReason::kDuplicate, position});
      continue;
    }
    rec.index = result.records.size();
    result.records.push_back(std::move(rec));
  }
  return result;
}

LoadResult load_corpus(std::istream& in, const CorpusConfig& config) {
  config.validate();
  CsvReader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw IngestError("empty corpus file", 1);
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) {
    header[0].erase(0, 3);
  }
  const auto crop_col = find_column(header, config.csv_columns.crop);
  const auto query_col = find_column(header, config.csv_columns.query);
  const auto answer_col = find_column(header, config.csv_columns.answer);

  std::vector<CallRecord> rows;
  std::vector<std::size_t> lines;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() != header.size()) {
      throw IngestError("expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()),
                        reader.record_line());
    }
    CallRecord row;
    row.crop = fields[crop_col];
    row.query_raw = fields[query_col];
    row.answer_raw = fields[answer_col];
    rows.push_back(std::move(row));
    lines.push_back(reader.record_line());
  }
  return clean_rows(rows, &lines);
}

LoadResult load_corpus(const std::string& path, const CorpusConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open corpus file: " + path, 0);
  return load_corpus(in, config);
}

// ---------------------------------------------------------------------------
// Transformation

CropMatch detect_and_strip_crop(std::string_view text,
                                const CropLexicon& lexicon) {
  auto tokens = text::tokenize(text);
  CropMatch match;
  match.crop = find_crop(tokens, lexicon);
  if (match.crop) tokens = remove_phrase(tokens, text::tokenize(*match.crop));
  match.stripped = text::join(tokens, " ");
  return match;
}

bool is_realtime_query(std::string_view text, const CorpusConfig& config) {
  const auto tokens = text::tokenize(text);
  for (const auto& keyword : config.realtime_keywords) {
    if (text::contains_phrase(tokens, text::tokenize(keyword))) return true;
  }
  return false;
}

std::vector<std::string> lexical_tokens(const std::vector<std::string>& tokens,
                                        const CropLexicon& lexicon,
                                        const CorpusConfig& config) {
  std::vector<std::string> out;
  for (const auto& token : tokens) {
    if (config.stopwords.count(token)) continue;
    auto stem = text::porter_stem(token);
    if (lexicon.contains(stem) || lexicon.contains(token)) continue;
    out.push_back(std::move(stem));
  }
  return out;
}

PreprocessOutcome preprocess_text(std::string_view raw,
                                  const CropLexicon& lexicon,
                                  const CorpusConfig& config) {
  PreprocessOutcome outcome;
  const auto cleaned = clean_query(raw);
  if (is_realtime_query(cleaned, config)) {
    outcome.dropped = DropReason::kRealtime;
    return outcome;
  }
  auto match = detect_and_strip_crop(cleaned, lexicon);
  // Any further crop mentions are stripped too, so neither view carries a
  // crop name; only the first one found is reported.
  auto tokens = text::tokenize(match.stripped);
  while (auto other = find_crop(tokens, lexicon)) {
    tokens = remove_phrase(tokens, text::tokenize(*other));
  }

  PreprocessedQuery query;
  query.detected_crop = std::move(match.crop);
  query.text_contextual = text::join(tokens, " ");
  query.tokens_lexical = lexical_tokens(tokens, lexicon, config);
  if (query.tokens_lexical.empty()) {
    outcome.dropped = DropReason::kEmptyAfterPreprocess;
    return outcome;
  }
  outcome.query = std::move(query);
  return outcome;
}

std::optional<PreprocessedQuery> preprocess_query(const CallRecord& record,
                                                  const CropLexicon& lexicon,
                                                  const CorpusConfig& config) {
  auto outcome = preprocess_text(record.query_raw, lexicon, config);
  if (outcome.query) outcome.query->record_index = record.index;
  return std::move(outcome.query);
}

PreprocessResult preprocess_corpus(const std::vector<CallRecord>& records,
                                   const CropLexicon& lexicon,
                                   const CorpusConfig& config) {
  PreprocessResult result;
  for (const auto& record : records) {
    auto outcome = preprocess_text(record.query_raw, lexicon, config);
    if (outcome.query) {
      outcome.query->record_index = record.index;
      result.queries.push_back(std::move(*outcome.query));
    } else {
      result.drops.push_back({*outcome.dropped, record.index});
    }
  }
  return result;
}

}  // namespace agriqrs::corpus
