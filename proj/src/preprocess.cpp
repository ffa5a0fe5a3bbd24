#include "mmdial/preprocess.hpp"

#include <fstream>

#include "mmdial/error.hpp"
#include "mmdial/io.hpp"

namespace mmdial {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_token_char(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

char ascii_lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

}  // namespace

bool is_question(std::string_view text) {
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return !text.empty() && text.back() == '?';
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (is_token_char(c)) {
      current.push_back(ascii_lower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

StopList load_stoplist(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open stop-word file " + path.string());
  StopList out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::string_view view = line;
    if (first) view = io::strip_bom(view);
    first = false;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    for (auto& token : tokenize(view)) out.insert(std::move(token));
  }
  return out;
}

std::vector<std::string> strip_stopwords(std::span<const std::string> tokens, const StopList& stoplist) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!stoplist.contains(t)) out.push_back(t);
  }
  return out;
}

std::string candidate_key(std::string_view dialogue_id, std::size_t turn_index) {
  std::string key(dialogue_id);
  key += '#';
  key += std::to_string(turn_index);
  return key;
}

std::string CandidateSentence::key() const { return candidate_key(dialogue_id, turn_index); }

ExclusionCounts& ExclusionCounts::operator+=(const ExclusionCounts& other) {
  turns += other.turns;
  questions += other.questions;
  first_turns += other.first_turns;
  empty_after_stopwords += other.empty_after_stopwords;
  candidates += other.candidates;
  return *this;
}

std::vector<CandidateSentence> extract_candidates(const Dialogue& dialogue, const StopList& stoplist,
                                                  ExclusionCounts* counts) {
  std::vector<CandidateSentence> out;
  ExclusionCounts local;
  for (std::size_t i = 0; i < dialogue.turns.size(); ++i) {
    const auto& text = dialogue.turns[i].text;
    ++local.turns;
    if (is_question(text)) {
      ++local.questions;
      continue;
    }
    if (i == 0) {
      ++local.first_turns;
      continue;
    }
    auto tokens = strip_stopwords(tokenize(text), stoplist);
    if (tokens.empty()) {
      ++local.empty_after_stopwords;
      continue;
    }
    ++local.candidates;
    out.push_back({dialogue.dialogue_id, i, text, std::move(tokens)});
  }
  if (counts) *counts += local;
  return out;
}

std::vector<CandidateSentence> extract_candidates(std::span<const Dialogue> dialogues, const StopList& stoplist,
                                                  ExclusionCounts* counts) {
  std::vector<CandidateSentence> out;
  for (const auto& d : dialogues) {
    auto part = extract_candidates(d, stoplist, counts);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

}  // namespace mmdial
