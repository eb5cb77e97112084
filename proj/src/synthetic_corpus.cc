#include "agriqrs/synthetic_corpus.h"

#include <array>
#include <ostream>

#include "agriqrs/errors.h"
#include "agriqrs/rng.h"
#include "agriqrs/text.h"

namespace agriqrs::synthetic {

namespace {

struct Template {
  const char* query;  // "{crop}" marks the substitution point
  std::array<const char*, 3> answers;
};

// clang-format off
constexpr Template kTemplates[] = {
  {"how to control fungal attack in {crop}",
   {"Spray mancozeb 2 gram per liter of water on {crop}",
    "Spray carbendazim 1 gram per liter water in {crop} field",
    "Apply copper oxychloride 3 gram per liter for fungal control"}},
  {"fertilizer dose for {crop}",
   {"Fertilizer dose for {crop} 120 kg nitrogen 60 kg phosphorus 40 kg potash per hectare",
    "Apply 10 tonne farm yard manure with 50 kg urea for {crop}",
    "Use npk 19 19 19 at 5 gram per liter as foliar spray"}},
  {"attack of nematode on {crop}",
   {"Apply carbofuran 3g granules 10 kg per acre in {crop}",
    "Apply neem cake 200 kg per acre to control nematodes",
    "Follow crop rotation with marigold to reduce nematode load"}},
  {"yellowing of leaves in {crop}",
   {"Spray ferrous sulphate 5 gram and citric acid 1 gram per liter in {crop}",
    "Apply zinc sulphate 25 kg per hectare for yellowing",
    "Drench with urea 10 gram per liter near root zone"}},
  {"precautions to avoid bollworm in {crop}",
   {"Install pheromone traps 5 per acre in {crop} field",
    "Spray emamectin benzoate 5 sg 0.4 gram per liter water",
    "Release trichogramma egg parasitoid 1.5 lakh per hectare"}},
  {"information about seed treatment of {crop}",
   {"Treat {crop} seed with thiram 3 gram per kg seed before sowing",
    "Seed treatment with trichoderma 4 gram per kg seed",
    "Use carbendazim 2 gram per kg seed for seed treatment"}},
  {"control of aphids in {crop}",
   {"Spray imidacloprid 0.5 ml per liter of water on {crop}",
    "Spray dimethoate 2 ml per liter water for aphids",
    "Spray neem oil 5 ml per liter with soap solution"}},
  {"weed management in {crop}",
   {"Apply pendimethalin 1 liter per acre as pre emergence in {crop}",
    "Do hand weeding at 20 and 40 days after sowing",
    "Spray glyphosate on bunds only avoiding the main crop"}},
  {"how to increase flowering in {crop}",
   {"Spray planofix 4 ml per 18 liter water on {crop}",
    "Spray boron 1 gram per liter at flower initiation",
    "Spray 00 52 34 at 5 gram per liter water"}},
  {"varieties of {crop} for sowing",
   {"Recommended varieties of {crop} are available at the nearest kvk",
    "Contact agriculture department for certified {crop} seed varieties",
    "Use high yielding hybrid varieties suited to the local season"}},
  {"control of leaf curl virus in {crop}",
   {"Remove infected {crop} plants and spray imidacloprid 0.3 ml per liter",
    "Control whitefly vector with thiamethoxam 0.2 gram per liter",
    "Use yellow sticky traps 10 per acre"}},
  {"irrigation schedule for {crop}",
   {"Irrigate {crop} at 10 to 12 days interval depending on soil",
    "Give light irrigation at critical growth stages",
    "Use drip irrigation to save water and improve yield"}},
  {"control of fruit borer in {crop}",
   {"Spray chlorantraniliprole 0.3 ml per liter water in {crop}",
    "Collect and destroy damaged fruits regularly",
    "Spray spinosad 0.3 ml per liter of water"}},
  {"control of white fly in {crop}",
   {"Spray diafenthiuron 1 gram per liter water on {crop}",
    "Spray acetamiprid 0.2 gram per liter for whitefly",
    "Install yellow sticky traps 12 per acre"}},
  {"micronutrient deficiency in {crop}",
   {"Spray micronutrient mixture grade 2 at 5 gram per liter on {crop}",
    "Apply zinc sulphate 10 kg and borax 5 kg per acre",
    "Spray chelated micronutrients 2 gram per liter water"}},
  {"control of termite in {crop}",
   {"Drench chlorpyriphos 5 ml per liter water around {crop} roots",
    "Apply fipronil granules 8 kg per acre",
    "Destroy termite mounds near the field"}},
  {"control of thrips in {crop}",
   {"Spray fipronil 2 ml per liter water on {crop}",
    "Spray spinetoram 0.5 ml per liter for thrips",
    "Use blue sticky traps 10 per acre"}},
  {"root rot disease in {crop}",
   {"Drench copper oxychloride 3 gram per liter near {crop} root zone",
    "Apply trichoderma enriched farm yard manure",
    "Improve drainage to avoid water logging"}},
  {"control of stem borer in {crop}",
   {"Apply cartap hydrochloride 4g granules 10 kg per acre in {crop}",
    "Spray chlorantraniliprole 0.4 ml per liter water",
    "Remove and destroy dead hearts"}},
  {"information regarding crop insurance for {crop}",
   {"Contact the nearest bank branch to enrol {crop} under crop insurance",
    "Apply through common service centre before the cut off date",
    "Premium for {crop} insurance is 2 percent of sum insured"}},
};
// clang-format on

constexpr const char* kCrops[] = {
    "Wheat",     "Paddy",       "Maize",        "Cotton Kapas", "Onion",
    "Garlic",    "Tomato",      "Potato",       "Brinjal",      "Chilli",
    "Cabbage",   "Cauliflower", "Okra",         "Groundnut",    "Soybean",
    "Mustard",   "Sugarcane",   "Turmeric",     "Ginger",       "Banana",
    "Mango",     "Pomegranate", "Mosambi",      "Bitter Gourd", "Bottle Gourd",
    "Cucumber",  "Watermelon",  "Bengal Gram",  "Black Gram",   "Sunflower",
};

constexpr const char* kSyllables[] = {"ka", "lo", "mir", "ta", "vun", "se",
                                      "dar", "pi", "qo", "zen", "bu", "hal",
                                      "ro", "wex", "ny", "gul"};

// Pseudo-words that collide with neither templates nor stopwords.
std::string noise_word(Rng& rng) {
  constexpr std::size_t kSyll = sizeof(kSyllables) / sizeof(kSyllables[0]);
  std::string w = "x";
  for (int s = 0; s < 3; ++s) w += kSyllables[rng.below(kSyll)];
  return w;
}

std::string substitute(const char* pattern, const std::string& crop) {
  std::string out(pattern);
  const std::string marker = "{crop}";
  for (auto pos = out.find(marker); pos != std::string::npos;
       pos = out.find(marker, pos + crop.size())) {
    out.replace(pos, marker.size(), crop);
  }
  return out;
}

std::string csv_field(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::size_t template_count() { return std::size(kTemplates); }

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options) {
  if (options.templates < 1 || options.templates > template_count()) {
    throw ConfigError("synthetic corpus: templates must lie in [1, " +
                      std::to_string(template_count()) + "]");
  }
  if (!(options.token_noise >= 0.0 && options.token_noise <= 1.0)) {
    throw ConfigError("synthetic corpus: token_noise must lie in [0, 1]");
  }
  SyntheticCorpus out;
  for (const char* c : kCrops) out.crops.emplace_back(c);
  Rng rng(options.seed);

  for (std::size_t i = 0; i < options.size; ++i) {
    const std::size_t t = i % options.templates;
    const std::string crop = out.crops[rng.below(out.crops.size())];
    const std::string crop_lower = text::to_lower_ascii(crop);

    // Noise is applied token by token outside the crop mention.
    const std::string pattern = kTemplates[t].query;
    const auto split = pattern.find("{crop}");
    auto perturb = [&](const std::string& part, bool& hit) {
      auto tokens = text::tokenize(part);
      for (auto& token : tokens) {
        if (rng.bernoulli(options.token_noise)) {
          token = noise_word(rng);
          hit = true;
        }
      }
      return text::join(tokens, " ");
    };
    bool noisy = false;
    const std::string before = perturb(pattern.substr(0, split), noisy);
    const std::string after = perturb(pattern.substr(split + 6), noisy);
    std::string query = before;
    if (!query.empty()) query += ' ';
    query += crop_lower;
    if (!after.empty()) query += ' ' + after;

    // Answer variants are skewed so answer clusters differ in size.
    const double u = rng.uniform();
    const std::size_t variant = u < 0.6 ? 0 : (u < 0.9 ? 1 : 2);

    corpus::CallRecord rec;
    rec.index = i;
    rec.crop = crop;
    rec.query_raw = query;
    rec.answer_raw = substitute(kTemplates[t].answers[variant], crop);
    out.records.push_back(std::move(rec));
    out.template_ids.push_back(t);
    out.noisy.push_back(noisy);
  }
  return out;
}

void write_csv(const SyntheticCorpus& corpus, std::ostream& out) {
  out << "Crop,QueryText,KccAns\n";
  for (const auto& r : corpus.records) {
    out << csv_field(r.crop) << ',' << csv_field(r.query_raw) << ','
        << csv_field(r.answer_raw) << '\n';
  }
}

corpus::CropLexicon lexicon_of(const SyntheticCorpus& corpus) {
  return corpus::CropLexicon(corpus.crops);
}

}  // namespace agriqrs::synthetic
