#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "mmdial/corpus.hpp"

namespace mmdial {

using StopList = std::unordered_set<std::string>;

// True iff the whitespace-trimmed text ends with '?'.
bool is_question(std::string_view text);

// Lowercases ASCII letters and splits on every maximal run of characters that
// are not ASCII alphanumerics. Bytes >= 0x80 count as token characters so
// UTF-8 words are kept whole.
std::vector<std::string> tokenize(std::string_view text);

// The bundled 174-word English list. Entries are run through tokenize(), so
// contractions such as "don't" contribute their fragments ("don", "t").
const StopList& default_stoplist();
std::span<const std::string_view> default_stopword_entries();

// One token per line; blank lines and '#' comments ignored.
StopList load_stoplist(const std::filesystem::path& path);

std::vector<std::string> strip_stopwords(std::span<const std::string> tokens, const StopList& stoplist);

struct CandidateSentence {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  std::string raw_text;
  std::vector<std::string> query_tokens;

  // "dialogue_id#turn_index", the key used for sentence embeddings.
  std::string key() const;

  bool operator==(const CandidateSentence&) const = default;
};

std::string candidate_key(std::string_view dialogue_id, std::size_t turn_index);

// Why turns were not turned into candidates. Each turn lands in exactly one
// bucket, checked in this order: question, first turn, empty after stop words.
struct ExclusionCounts {
  std::size_t turns = 0;
  std::size_t questions = 0;
  std::size_t first_turns = 0;
  std::size_t empty_after_stopwords = 0;
  std::size_t candidates = 0;

  ExclusionCounts& operator+=(const ExclusionCounts& other);
};

std::vector<CandidateSentence> extract_candidates(const Dialogue& dialogue, const StopList& stoplist,
                                                  ExclusionCounts* counts = nullptr);

std::vector<CandidateSentence> extract_candidates(std::span<const Dialogue> dialogues,
                                                  const StopList& stoplist,
                                                  ExclusionCounts* counts = nullptr);

}  // namespace mmdial
