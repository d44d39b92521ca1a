#include "polab/datasets.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "polab/errors.hpp"
#include "polab/rng.hpp"

namespace polab {
namespace {
constexpr uint64_t kDataTag = 0x64617461;

// Ids in order of first appearance across the templates.
enum Word : int {
  POSITIVE = 0,
  NEGATIVE = 1,
  SENTIMENT = 2,
  BASED = 3,
  ON = 4,
  MY = 5,
  JUDGEMENT = 6,
  IT = 7,
  HAS = 8,
  A = 9,
};
}  // namespace

const std::vector<std::string>& template_words() {
  static const std::vector<std::string> words = {
      "positive", "negative", "sentiment", "based", "on",
      "my",       "judgement", "it",       "has",   "a"};
  return words;
}

const char* pair_style_name(PairStyle s) {
  switch (s) {
    case PairStyle::single_token: return "single_token";
    case PairStyle::short_suffix: return "short_suffix";
    case PairStyle::long_suffix: return "long_suffix";
    case PairStyle::prefix_suffix: return "prefix_suffix";
  }
  return "single_token";
}

std::optional<PairStyle> pair_style_from_name(std::string_view name) {
  for (PairStyle s : {PairStyle::single_token, PairStyle::short_suffix,
                      PairStyle::long_suffix, PairStyle::prefix_suffix})
    if (name == pair_style_name(s)) return s;
  return std::nullopt;
}

Seq template_response(PairStyle s, bool positive) {
  const int sent = positive ? POSITIVE : NEGATIVE;
  switch (s) {
    case PairStyle::single_token:
      return {sent};
    case PairStyle::short_suffix:
      return {sent, SENTIMENT};
    case PairStyle::long_suffix:
      return {sent, SENTIMENT, BASED, ON, MY, JUDGEMENT};
    case PairStyle::prefix_suffix:
      return {IT, HAS, A, sent, SENTIMENT, BASED, ON, MY, JUDGEMENT};
  }
  return {sent};
}

int differ_position(PairStyle s) {
  return s == PairStyle::prefix_suffix ? 3 : 0;
}

std::vector<PreferenceTriple> build_sentiment_dataset(PairStyle style,
                                                      int n_prompts,
                                                      int prompt_len, int vocab,
                                                      uint64_t seed) {
  if (n_prompts <= 0 || prompt_len < 0)
    throw std::invalid_argument("build_sentiment_dataset: bad sizes");
  if (vocab < static_cast<int>(template_words().size()))
    throw std::invalid_argument(
        "build_sentiment_dataset: vocab smaller than template word list");
  std::vector<PreferenceTriple> out;
  out.reserve(n_prompts);
  for (int p = 0; p < n_prompts; ++p) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(p),
                        static_cast<uint64_t>(style), kDataTag));
    PreferenceTriple t;
    t.prompt.resize(prompt_len);
    for (int& tok : t.prompt) tok = rng.uniform_int(vocab);
    bool chosen_is_positive = rng.uniform() < 0.5;
    t.y_w = template_response(style, chosen_is_positive);
    t.y_l = template_response(style, !chosen_is_positive);
    out.push_back(std::move(t));
  }
  return out;
}

PreferenceTriple build_edit1_triple(int L, int m, int vocab, uint64_t seed) {
  if (L < 1) throw std::invalid_argument("build_edit1_triple: L must be >= 1");
  if (m < 1 || m > L)
    throw std::invalid_argument("build_edit1_triple: need 1 <= m <= L");
  if (vocab < 2) throw std::invalid_argument("build_edit1_triple: vocab < 2");
  Rng rng(derive_seed(seed, static_cast<uint64_t>(L), static_cast<uint64_t>(m),
                      kDataTag));
  PreferenceTriple t;
  t.y_w.resize(L);
  for (int& tok : t.y_w) tok = rng.uniform_int(vocab);
  t.y_l = t.y_w;
  int pos = m - 1;
  int other = rng.uniform_int(vocab - 1);
  if (other >= t.y_w[pos]) ++other;  // distinct token at the edit
  t.y_l[pos] = other;
  return t;
}

void save_triples(const std::string& path,
                  const std::vector<PreferenceTriple>& triples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  for (const auto& t : triples) {
    nlohmann::json j;
    j["prompt"] = t.prompt;
    j["chosen"] = t.y_w;
    j["rejected"] = t.y_l;
    out << j.dump() << "\n";
  }
  if (!out) throw io_error("write failed: " + path);
}

std::vector<PreferenceTriple> load_triples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  std::vector<PreferenceTriple> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("prompt") || !j.contains("chosen") ||
        !j.contains("rejected"))
      throw config_error(path + ":" + std::to_string(lineno) +
                         ": bad triple record");
    PreferenceTriple t;
    t.prompt = j["prompt"].get<Seq>();
    t.y_w = j["chosen"].get<Seq>();
    t.y_l = j["rejected"].get<Seq>();
    out.push_back(std::move(t));
  }
  if (out.empty()) throw config_error(path + ": no triples");
  return out;
}

}  // namespace polab
