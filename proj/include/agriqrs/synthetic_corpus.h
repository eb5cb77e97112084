#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "agriqrs/corpus.h"

namespace agriqrs::synthetic {

// Template corpus for offline evaluation: each query instantiates one of a
// fixed set of agricultural question templates with a crop substituted in,
// then each non-crop token is independently replaced by a random noise word
// with probability `token_noise`.
struct SyntheticOptions {
  std::size_t size = 2000;
  std::size_t templates = 20;  // at most template_count()
  double token_noise = 0.1;
  std::uint64_t seed = 11;
};

struct SyntheticCorpus {
  std::vector<corpus::CallRecord> records;
  std::vector<std::size_t> template_ids;  // ground-truth template per record
  std::vector<bool> noisy;                // any token replaced
  std::vector<std::string> crops;         // crop names used (the lexicon)
};

std::size_t template_count();

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options);

// CSV with the default Crop/QueryText/KccAns header.
void write_csv(const SyntheticCorpus& corpus, std::ostream& out);

corpus::CropLexicon lexicon_of(const SyntheticCorpus& corpus);

}  // namespace agriqrs::synthetic
