#include "qa/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "qa/errors.hpp"
#include "qa/text.hpp"

namespace qa {

namespace {
constexpr std::size_t kMaxCharsPerWord = 100;
}

const std::vector<std::string>& Vocab::special_tokens() {
  static const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  return kSpecials;
}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const auto& specials = special_tokens();
  if (tokens_.size() < specials.size()) throw DataError("vocab: missing special tokens");
  for (std::size_t i = 0; i < specials.size(); ++i) {
    if (tokens_[i] != specials[i]) {
      throw DataError("vocab: missing special tokens (expected " + specials[i] + " at line " + std::to_string(i) +
                      ")");
    }
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& tok = tokens_[i];
    if (tok.empty()) throw DataError("vocab: empty token at line " + std::to_string(i));
    for (char32_t c : text::decode_utf8(tok)) {
      if (text::is_whitespace(c)) throw DataError("vocab: token at line " + std::to_string(i) + " contains whitespace");
    }
    if (!index_.emplace(tok, static_cast<int>(i)).second) {
      throw DataError("vocab: duplicate token '" + tok + "' at line " + std::to_string(i));
    }
  }
}

bool Vocab::contains(std::string_view token) const { return index_.find(std::string(token)) != index_.end(); }

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("vocab: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("vocab: cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

void save_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("vocab: cannot write " + path.string());
  for (const auto& tok : vocab.tokens()) out << tok << '\n';
}

Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_words) {
  std::map<std::string, std::size_t> freq;
  std::set<char32_t> chars;
  for (const auto& doc : corpus) {
    for (const auto& w : basic_tokenize(doc)) {
      ++freq[w.text];
      for (char32_t c : text::decode_utf8(w.text)) chars.insert(c);
    }
  }
  std::vector<std::string> tokens = Vocab::special_tokens();
  std::set<std::string> seen(tokens.begin(), tokens.end());
  auto push = [&](std::string tok) {
    if (seen.insert(tok).second) tokens.push_back(std::move(tok));
  };
  for (char32_t c : chars) push(text::encode_utf8(c));
  for (char32_t c : chars) push(std::string(Vocab::kContinuation) + text::encode_utf8(c));

  std::vector<std::pair<std::string, std::size_t>> words(freq.begin(), freq.end());
  std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::size_t added = 0;
  for (auto& [w, n] : words) {
    if (max_words != 0 && added >= max_words) break;
    if (seen.count(w) == 0) ++added;
    push(w);
  }
  return Vocab(std::move(tokens));
}

std::vector<WordSpan> basic_tokenize(std::string_view input) {
  const std::u32string cps = text::decode_utf8(input);
  std::vector<WordSpan> out;
  std::u32string cur;
  int cur_start = -1;
  auto flush = [&](int end) {
    if (!cur.empty()) out.push_back({text::encode_utf8(cur), cur_start, end});
    cur.clear();
    cur_start = -1;
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    const int pos = static_cast<int>(i);
    if (text::is_whitespace(c)) {
      flush(pos);
    } else if (text::is_punctuation(c)) {
      flush(pos);
      out.push_back({text::encode_utf8(c), pos, pos + 1});
    } else {
      if (cur.empty()) cur_start = pos;
      cur.push_back(text::to_lower(c));
    }
  }
  flush(static_cast<int>(cps.size()));
  return out;
}

namespace {

// Pieces plus their code-point lengths (excluding the "##" prefix).
struct Piece {
  std::string token;
  std::size_t chars;
};

std::vector<Piece> wordpiece_pieces(std::string_view word, const Vocab& vocab) {
  const std::u32string cps = text::decode_utf8(word);
  const std::vector<Piece> unk = {{Vocab::special_tokens()[Vocab::kUnk], cps.size()}};
  if (cps.empty()) return {};
  if (cps.size() > kMaxCharsPerWord) return unk;
  std::vector<Piece> pieces;
  std::size_t start = 0;
  while (start < cps.size()) {
    std::size_t end = cps.size();
    std::string match;
    while (start < end) {
      std::string candidate = text::encode_utf8(std::u32string_view(cps).substr(start, end - start));
      if (start > 0) candidate = std::string(Vocab::kContinuation) + candidate;
      if (vocab.contains(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) return unk;
    pieces.push_back({std::move(match), end - start});
    start = end;
  }
  return pieces;
}

}  // namespace

std::vector<std::string> wordpiece_tokenize(std::string_view word, const Vocab& vocab) {
  std::vector<std::string> out;
  for (auto& p : wordpiece_pieces(word, vocab)) out.push_back(std::move(p.token));
  return out;
}

std::vector<TokenSpan> tokenize_with_offsets(std::string_view input, const Vocab& vocab) {
  std::vector<TokenSpan> out;
  for (const auto& w : basic_tokenize(input)) {
    int pos = w.char_start;
    for (const auto& p : wordpiece_pieces(w.text, vocab)) {
      const int len = static_cast<int>(p.chars);
      out.push_back({vocab.id(p.token), pos, pos + len});
      pos += len;
    }
  }
  return out;
}

std::vector<int> tokenize_ids(std::string_view input, const Vocab& vocab) {
  std::vector<int> ids;
  for (const auto& t : tokenize_with_offsets(input, vocab)) ids.push_back(t.id);
  return ids;
}

std::size_t Encoding::real_length() const {
  return static_cast<std::size_t>(std::count(pad_mask.begin(), pad_mask.end(), 1));
}

void validate_encoding(const Encoding& enc) {
  const std::size_t n = enc.ids.size();
  if (enc.segment_ids.size() != n || enc.pad_mask.size() != n || enc.offsets.size() != n) {
    throw std::logic_error("encoding: field lengths differ");
  }
  if (n == 0 || enc.ids[0] != Vocab::kCls) throw std::logic_error("encoding: position 0 is not [CLS]");
  if (std::count(enc.ids.begin(), enc.ids.end(), Vocab::kCls) != 1) {
    throw std::logic_error("encoding: [CLS] must appear exactly once");
  }
  const std::size_t real = enc.real_length();
  for (std::size_t t = 0; t < n; ++t) {
    const bool is_real = t < real;
    if (enc.pad_mask[t] != (is_real ? 1 : 0)) throw std::logic_error("encoding: padding is not a suffix");
    if (!is_real && (enc.ids[t] != Vocab::kPad || enc.offsets[t].valid())) {
      throw std::logic_error("encoding: pad position carries data");
    }
  }
  const std::size_t ctx_end = enc.context_begin + enc.context_len;
  if (enc.context_begin < 2 || ctx_end >= real || enc.ids[enc.context_begin - 1] != Vocab::kSep ||
      enc.ids[ctx_end] != Vocab::kSep || ctx_end + 1 != real) {
    throw std::logic_error("encoding: separator layout broken");
  }
  int prev_end = -1;
  for (std::size_t t = 0; t < real; ++t) {
    const int expect_seg = t < enc.context_begin ? 0 : 1;
    if (enc.segment_ids[t] != expect_seg) throw std::logic_error("encoding: bad segment id at " + std::to_string(t));
    if (enc.is_context(t)) {
      const CharSpan& o = enc.offsets[t];
      if (!o.valid() || o.end <= o.start || o.start < prev_end) {
        throw std::logic_error("encoding: context offsets not increasing at " + std::to_string(t));
      }
      prev_end = o.end;
    } else if (enc.offsets[t].valid()) {
      throw std::logic_error("encoding: non-context token has offsets at " + std::to_string(t));
    }
  }
}

std::vector<std::size_t> window_starts(std::size_t n, std::size_t capacity, std::size_t overlap) {
  if (capacity == 0) throw std::invalid_argument("window_starts: zero context capacity");
  std::vector<std::size_t> starts{0};
  if (n <= capacity) return starts;
  if (overlap >= capacity) {
    throw std::invalid_argument("window_starts: overlap " + std::to_string(overlap) +
                                " must be smaller than window capacity " + std::to_string(capacity));
  }
  const std::size_t step = capacity - overlap;
  std::size_t start = 0;
  while (start + capacity < n) {
    start += step;
    starts.push_back(start);
  }
  return starts;
}

std::vector<Encoding> encode_tokens(std::span<const int> question_ids, std::span<const TokenSpan> context,
                                    std::size_t max_len, std::size_t overlap) {
  if (max_len < question_ids.size() + 4) {
    throw DataError("encode_pair: question of " + std::to_string(question_ids.size()) +
                    " tokens does not fit max_len " + std::to_string(max_len));
  }
  const std::size_t capacity = max_len - question_ids.size() - 3;
  std::vector<Encoding> out;
  for (std::size_t start : window_starts(context.size(), capacity, overlap)) {
    Encoding enc;
    enc.ids.reserve(max_len);
    auto push = [&enc](int id, int seg, CharSpan off) {
      enc.ids.push_back(id);
      enc.segment_ids.push_back(seg);
      enc.pad_mask.push_back(1);
      enc.offsets.push_back(off);
    };
    push(Vocab::kCls, 0, {});
    for (int q : question_ids) push(q, 0, {});
    push(Vocab::kSep, 0, {});
    enc.window_start = start;
    enc.context_begin = enc.ids.size();
    const std::size_t end = std::min(context.size(), start + capacity);
    for (std::size_t k = start; k < end; ++k) push(context[k].id, 1, {context[k].char_start, context[k].char_end});
    enc.context_len = end - start;
    push(Vocab::kSep, 1, {});
    while (enc.ids.size() < max_len) {
      enc.ids.push_back(Vocab::kPad);
      enc.segment_ids.push_back(0);
      enc.pad_mask.push_back(0);
      enc.offsets.push_back({});
    }
    out.push_back(std::move(enc));
  }
  return out;
}

std::vector<Encoding> encode_pair(std::string_view question, std::string_view context, const Vocab& vocab,
                                  std::size_t max_len, std::size_t overlap) {
  const std::vector<int> q = tokenize_ids(question, vocab);
  const std::vector<TokenSpan> c = tokenize_with_offsets(context, vocab);
  return encode_tokens(q, c, max_len, overlap);
}

std::string decode_span(const Encoding& enc, std::size_t i, std::size_t j, std::string_view original_context) {
  if (i > j) throw std::invalid_argument("decode_span: start " + std::to_string(i) + " after end " + std::to_string(j));
  if (!enc.is_context(i) || !enc.is_context(j)) {
    throw std::invalid_argument("decode_span: span (" + std::to_string(i) + ", " + std::to_string(j) +
                                ") does not index context tokens");
  }
  return text::substr(original_context, static_cast<std::size_t>(enc.offsets[i].start),
                      static_cast<std::size_t>(enc.offsets[j].end));
}

}  // namespace qa
