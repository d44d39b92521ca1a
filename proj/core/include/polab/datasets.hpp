#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polab/models.hpp"

namespace polab {

struct PreferenceTriple {
  Seq prompt;
  Seq y_w;  // chosen response
  Seq y_l;  // rejected response
};

// Tiny word-level sentiment pairs. The two responses in every pair differ in
// exactly one word ("positive" vs "negative"); the styles vary how much
// identical context surrounds that word.
enum class PairStyle {
  single_token,   // "positive" / "negative"
  short_suffix,   // one shared trailing word
  long_suffix,    // five shared trailing words
  prefix_suffix,  // shared three-word prefix and five-word suffix
};

const char* pair_style_name(PairStyle s);
std::optional<PairStyle> pair_style_from_name(std::string_view name);

// Word list backing the templates; word i has token id i. Ids 0 and 1 are
// the two sentiment words.
const std::vector<std::string>& template_words();

// The two template responses (chosen label applied later) for one style.
Seq template_response(PairStyle s, bool positive);

// 0-based position where the two template responses differ.
int differ_position(PairStyle s);

// n_prompts random prompts over [0, vocab); each pair's chosen response is
// the positive or negative variant by a per-prompt coin flip.
std::vector<PreferenceTriple> build_sentiment_dataset(PairStyle style,
                                                      int n_prompts,
                                                      int prompt_len, int vocab,
                                                      uint64_t seed);

// One edit-distance-one pair with empty prompt: length L, random tokens,
// differing exactly at 1-based position m.
PreferenceTriple build_edit1_triple(int L, int m, int vocab, uint64_t seed);

// JSON-lines round trip: {"prompt":[...],"chosen":[...],"rejected":[...]}.
void save_triples(const std::string& path,
                  const std::vector<PreferenceTriple>& triples);
std::vector<PreferenceTriple> load_triples(const std::string& path);

}  // namespace polab
