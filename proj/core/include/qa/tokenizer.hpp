#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qa {

/// Token inventory with the five reserved specials at ids 0..4.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;
  static constexpr std::string_view kContinuation = "##";

  static const std::vector<std::string>& special_tokens();

  Vocab() = default;
  /// Validates specials, duplicates and whitespace; throws DataError.
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// -1 when absent.
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

Vocab load_vocab(const std::filesystem::path& path);
void save_vocab(const Vocab& vocab, const std::filesystem::path& path);

/// Frequency vocabulary for corpora without a shipped vocab: specials, then
/// every observed character as a word-initial and a "##" piece, then whole
/// words by descending frequency (ties lexicographic). `max_words` = 0 keeps
/// all words.
Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_words = 0);

struct WordSpan {
  std::string text;
  int char_start;
  int char_end;

  bool operator==(const WordSpan&) const = default;
};

/// Lowercases, splits on whitespace and isolates punctuation characters.
/// Offsets are code-point positions in the original text.
std::vector<WordSpan> basic_tokenize(std::string_view text);

/// Greedy longest-match-first. A word with no full decomposition becomes
/// a single [UNK].
std::vector<std::string> wordpiece_tokenize(std::string_view word, const Vocab& vocab);

struct TokenSpan {
  int id;
  int char_start;
  int char_end;
};

/// basic_tokenize + wordpiece with per-piece character offsets.
std::vector<TokenSpan> tokenize_with_offsets(std::string_view text, const Vocab& vocab);
std::vector<int> tokenize_ids(std::string_view text, const Vocab& vocab);

struct CharSpan {
  int start = -1;
  int end = -1;

  bool valid() const { return start >= 0; }
  bool operator==(const CharSpan&) const = default;
};

/// One packed window: [CLS] question [SEP] context-window [SEP] [PAD]*.
struct Encoding {
  std::vector<int> ids;
  std::vector<int> segment_ids;
  std::vector<int> pad_mask;
  std::vector<CharSpan> offsets;
  /// Index of this window's first token in the full context token list.
  std::size_t window_start = 0;
  /// Position in `ids` of the first context token.
  std::size_t context_begin = 0;
  std::size_t context_len = 0;

  std::size_t length() const { return ids.size(); }
  std::size_t real_length() const;
  bool is_context(std::size_t pos) const { return pos >= context_begin && pos < context_begin + context_len; }
};

/// Throws std::logic_error describing the first broken layout invariant.
void validate_encoding(const Encoding& enc);

/// Window start indices for `n` context tokens: consecutive windows share
/// `overlap` tokens and the final window may be shorter than `capacity`.
std::vector<std::size_t> window_starts(std::size_t n, std::size_t capacity, std::size_t overlap);

inline constexpr std::size_t kDefaultMaxLen = 512;
inline constexpr std::size_t kDefaultOverlap = 128;

std::vector<Encoding> encode_tokens(std::span<const int> question_ids, std::span<const TokenSpan> context,
                                    std::size_t max_len, std::size_t overlap);

std::vector<Encoding> encode_pair(std::string_view question, std::string_view context, const Vocab& vocab,
                                  std::size_t max_len = kDefaultMaxLen, std::size_t overlap = kDefaultOverlap);

/// Original-cased substring covering context tokens i..j of `enc`.
std::string decode_span(const Encoding& enc, std::size_t i, std::size_t j, std::string_view original_context);

}  // namespace qa
