#include "procap/tokenizer.hpp"

#include "procap/error.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace procap {

namespace {
const std::vector<std::string> kReserved{"<pad>", "<bos>", "<eos>", "<unk>", "<null>", "[SCENE]", "[PROJ]"};
}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 128 && (std::isspace(u) || std::ispunct(u))) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::string normalize_caption(std::string_view text) {
  std::string out;
  for (const auto& w : split_words(text)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(from_tokens(kReserved)) {}

Vocabulary Vocabulary::build(const std::vector<std::string>& captions) {
  std::set<std::string> words;
  for (const auto& c : captions) {
    for (auto& w : split_words(c)) words.insert(std::move(w));
  }
  std::vector<std::string> tokens = kReserved;
  for (const auto& w : words) {
    if (std::find(kReserved.begin(), kReserved.end(), w) == kReserved.end()) tokens.push_back(w);
  }
  return from_tokens(tokens);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < kReserved.size() || !std::equal(kReserved.begin(), kReserved.end(), tokens.begin())) {
    throw Error(ErrorCode::kSchemaViolation, "vocabulary must start with the reserved tokens");
  }
  Vocabulary v{RawTag{}};
  v.tokens_ = tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!v.index_.emplace(tokens[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::kSchemaViolation, "duplicate vocabulary token '" + tokens[i] + "'");
    }
  }
  return v;
}

int Vocabulary::id(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::word_ids(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(id(w));
  return ids;
}

std::vector<int> Vocabulary::encode(std::string_view text, int max_len) const {
  if (max_len < 2) throw Error(ErrorCode::kInvalidArgument, "max_len must leave room for <bos> and <eos>");
  std::vector<int> ids{kBos};
  for (int w : word_ids(text)) {
    if (static_cast<int>(ids.size()) + 1 >= max_len) break;
    ids.push_back(w);
  }
  ids.push_back(kEos);
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (is_special(id) || id < 0 || id >= size()) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

}  // namespace procap
