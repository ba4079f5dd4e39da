#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace procap {

/// Lowercases, maps ASCII punctuation to spaces and splits on whitespace.
std::vector<std::string> split_words(std::string_view text);
/// split_words joined with single spaces.
std::string normalize_caption(std::string_view text);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNull = 4;
  static constexpr int kScene = 5;
  static constexpr int kProj = 6;
  static constexpr int kReservedCount = 7;

  Vocabulary();
  /// Reserved tokens followed by the distinct words of `captions` in
  /// lexicographic order.
  static Vocabulary build(const std::vector<std::string>& captions);
  /// Rebuilds from a serialized token list (reserved tokens included).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(const std::string& word) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  static bool is_special(int id) { return id >= 0 && id < kReservedCount; }

  /// <bos> words... <eos>, truncated to max_len while keeping <eos>.
  std::vector<int> encode(std::string_view text, int max_len) const;
  /// Word ids only (no <bos>/<eos>); OOV words map to <unk>.
  std::vector<int> word_ids(std::string_view text) const;
  /// Joins non-special tokens with single spaces.
  std::string decode(const std::vector<int>& ids) const;

 private:
  struct RawTag {};
  explicit Vocabulary(RawTag) {}

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace procap
