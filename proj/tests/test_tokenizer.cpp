#include <random>
#include <set>

#include "doctest.h"
#include "qa/errors.hpp"
#include "qa/text.hpp"
#include "qa/tokenizer.hpp"
#include "temp_dir.hpp"

using namespace qa;
using qa::testing::TempDir;

namespace {

Vocab small_vocab(std::vector<std::string> extra) {
  std::vector<std::string> t = Vocab::special_tokens();
  t.insert(t.end(), extra.begin(), extra.end());
  return Vocab(std::move(t));
}

// Greedy longest-match written out directly on the byte string (ASCII words only).
std::vector<std::string> wordpiece_oracle(const std::string& word, const Vocab& v) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    std::string found;
    for (std::size_t len = word.size() - i; len > 0; --len) {
      std::string piece = (i ? "##" : "") + word.substr(i, len);
      if (v.contains(piece)) {
        found = piece;
        i += len;
        break;
      }
    }
    if (found.empty()) return {"[UNK]"};
    out.push_back(found);
  }
  return out;
}

}  // namespace

TEST_SUITE("tokenizer") {

TEST_CASE("load_vocab examples") {
  TempDir dir;
  const Vocab v = load_vocab(dir.write("v.txt", "[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\nplay\n##ing\n"));
  CHECK(v.size() == 7);
  CHECK(v.id("##ing") == 6);
  CHECK(v.id("[CLS]") == Vocab::kCls);

  try {
    load_vocab(dir.write("dup.txt", "[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\nplay\nplay\n"));
    FAIL("expected duplicate error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }
  try {
    load_vocab(dir.write("empty.txt", ""));
    FAIL("expected specials error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("missing special") != std::string::npos);
  }
  CHECK_THROWS_AS(load_vocab(dir.write("order.txt", "[UNK]\n[PAD]\n[CLS]\n[SEP]\n[MASK]\n")), DataError);
  CHECK_THROWS_AS(load_vocab(dir.file("absent.txt")), DataError);
}

TEST_CASE("vocab save/load round-trip") {
  TempDir dir;
  const Vocab v = small_vocab({"héllo", "##s", "x"});
  save_vocab(v, dir.file("v.txt"));
  CHECK(load_vocab(dir.file("v.txt")) == v);
}

TEST_CASE("basic_tokenize examples") {
  CHECK(basic_tokenize("The cat.") ==
        std::vector<WordSpan>{{"the", 0, 3}, {"cat", 4, 7}, {".", 7, 8}});
  CHECK(basic_tokenize("").empty());
  CHECK(basic_tokenize("héllo") == std::vector<WordSpan>{{"héllo", 0, 5}});
  CHECK(basic_tokenize("  Ünïcode ΣΑΣ\tok!?") ==
        std::vector<WordSpan>{{"ünïcode", 2, 9}, {"σασ", 10, 13}, {"ok", 14, 16}, {"!", 16, 17}, {"?", 17, 18}});
}

TEST_CASE("wordpiece examples") {
  const Vocab v = small_vocab({"play", "##ing", "cat"});
  CHECK(wordpiece_tokenize("playing", v) == std::vector<std::string>{"play", "##ing"});
  CHECK(wordpiece_tokenize("cat", v) == std::vector<std::string>{"cat"});
  CHECK(wordpiece_tokenize("zzz", v) == std::vector<std::string>{"[UNK]"});
  CHECK(wordpiece_tokenize("playz", v) == std::vector<std::string>{"[UNK]"});
  const Vocab aa = small_vocab({"a", "##a"});
  CHECK(wordpiece_tokenize(std::string(100, 'a'), aa).size() == 100);
  CHECK(wordpiece_tokenize(std::string(101, 'a'), aa) == std::vector<std::string>{"[UNK]"});
}

TEST_CASE("wordpiece agrees with the greedy oracle on random words") {
  const Vocab v = small_vocab({"a", "b", "ab", "abc", "##a", "##b", "##c", "##bc", "##ca", "c", "bca"});
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::string w;
    const std::size_t len = 1 + rng() % 8;
    for (std::size_t i = 0; i < len; ++i) w += "abcd"[rng() % 4];
    CAPTURE(w);
    CHECK(wordpiece_tokenize(w, v) == wordpiece_oracle(w, v));
  }
}

TEST_CASE("encode_pair defaults") {
  CHECK(kDefaultMaxLen == 512);
  CHECK(kDefaultOverlap == 128);
}

TEST_CASE("window starts example") {
  CHECK(window_starts(10, 7, 3) == std::vector<std::size_t>{0, 4});
  CHECK(window_starts(5, 7, 3) == std::vector<std::size_t>{0});
  CHECK(window_starts(5, 7, 9) == std::vector<std::size_t>{0});
  CHECK_THROWS(window_starts(10, 7, 7));
}

TEST_CASE("encode_pair with 10 context tokens, capacity 7, overlap 3") {
  const Vocab v = small_vocab({"q", "a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
  // max_len 11 = 1 question token + 3 specials + capacity 7.
  const auto encs = encode_pair("q", "a b c d e f g h i j", v, 11, 3);
  REQUIRE(encs.size() == 2);
  CHECK(encs[0].window_start == 0);
  CHECK(encs[1].window_start == 4);
  CHECK(encs[0].context_len == 7);
  CHECK(encs[1].context_len == 6);
  CHECK(encs[1].ids[3] == v.id("e"));
}

TEST_CASE("short context gives one padded window") {
  const Vocab v = small_vocab({"who", "cat", "sat"});
  const auto encs = encode_pair("Who?", "Cat sat.", v, 16, 4);
  REQUIRE(encs.size() == 1);
  const Encoding& e = encs[0];
  validate_encoding(e);
  CHECK(e.length() == 16);
  // [CLS] who ? [SEP] cat sat . [SEP]
  CHECK(e.ids[0] == Vocab::kCls);
  CHECK(e.ids[1] == v.id("who"));
  CHECK(e.ids[2] == Vocab::kUnk);
  CHECK(e.ids[3] == Vocab::kSep);
  CHECK(e.ids[7] == Vocab::kSep);
  CHECK(e.real_length() == 8);
  for (std::size_t t = 8; t < 16; ++t) {
    CHECK(e.pad_mask[t] == 0);
    CHECK(e.ids[t] == Vocab::kPad);
  }
  CHECK(e.segment_ids == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(e.offsets[4].start == 0);
  CHECK(e.offsets[4].end == 3);
  CHECK(e.offsets[0].start == -1);
}

TEST_CASE("question too long is an error") {
  const Vocab v = small_vocab({"a"});
  CHECK_THROWS_AS(encode_pair("a a a a a", "a", v, 8, 2), DataError);
}

TEST_CASE("decode_span examples") {
  const Vocab v = small_vocab({"i", "play", "##ing", "like"});
  const std::string ctx = "I'm Playing";
  const auto encs = encode_pair("like", ctx, v, 16, 4);
  const Encoding& e = encs[0];
  // context tokens: i ' m play ##ing -> [UNK] for ' and m
  const std::size_t b = e.context_begin;
  CHECK(decode_span(e, b, b, ctx) == "I");
  CHECK(decode_span(e, b + 3, b + 4, ctx) == "Playing");
  CHECK(e.offsets[b + 3].start == 4);
  CHECK(e.offsets[b + 4].end == 11);
  CHECK_THROWS_AS(decode_span(e, 0, b, ctx), std::invalid_argument);
  CHECK_THROWS_AS(decode_span(e, b + 2, b + 1, ctx), std::invalid_argument);
  CHECK_THROWS_AS(decode_span(e, b, b + 5, ctx), std::invalid_argument);
}

TEST_CASE("random texts: windows cover the context, encodings are valid, spans are verbatim") {
  const std::vector<std::string> words = {"alpha", "Beta", "γάμμα", "delta", "eps", "Zeta", "ÉTÉ", "x"};
  const std::vector<std::string> puncts = {".", ",", "!", "?", "-"};
  std::vector<std::string> corpus;
  std::mt19937_64 rng(12);
  auto random_text = [&](std::size_t n) {
    std::string s;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) s += (rng() % 5 == 0) ? "  " : " ";
      s += words[rng() % words.size()];
      if (rng() % 4 == 0) s += puncts[rng() % puncts.size()];
    }
    return s;
  };
  for (int i = 0; i < 20; ++i) corpus.push_back(random_text(10));
  const Vocab v = build_vocab(corpus, 4);

  for (int trial = 0; trial < 200; ++trial) {
    const std::string q = random_text(1 + rng() % 3);
    const std::string ctx = random_text(1 + rng() % 40);
    const std::size_t max_len = 12 + rng() % 30;
    const auto qids = tokenize_ids(q, v);
    if (max_len < qids.size() + 4) continue;
    const std::size_t cap = max_len - qids.size() - 3;
    const std::size_t overlap = rng() % cap;
    const auto spans = tokenize_with_offsets(ctx, v);
    const auto encs = encode_pair(q, ctx, v, max_len, overlap);
    std::set<std::size_t> covered;
    for (std::size_t w = 0; w < encs.size(); ++w) {
      const Encoding& e = encs[w];
      validate_encoding(e);
      CHECK(e.length() == max_len);
      for (std::size_t k = 0; k < e.context_len; ++k) {
        covered.insert(e.window_start + k);
        CHECK(e.ids[e.context_begin + k] == spans[e.window_start + k].id);
      }
      if (w + 1 < encs.size()) {
        CHECK(e.window_start + e.context_len - encs[w + 1].window_start == overlap);
      }
      // Any (i, j) over context is a verbatim substring of the original.
      if (e.context_len > 0) {
        const std::size_t i = e.context_begin + rng() % e.context_len;
        const std::size_t j = i + rng() % (e.context_begin + e.context_len - i);
        const std::string got = decode_span(e, i, j, ctx);
        CHECK(got == text::substr(ctx, e.offsets[i].start, e.offsets[j].end));
        CHECK(ctx.find(got) != std::string::npos);
      }
    }
    CHECK(covered.size() == spans.size());
    // The question's token ids do not depend on max_len.
    CHECK(std::vector<int>(encs[0].ids.begin() + 1, encs[0].ids.begin() + 1 + qids.size()) == qids);
  }
}

TEST_CASE("tokenization is deterministic and independent of max_len") {
  const Vocab v = small_vocab({"play", "##ing", "the", "cat"});
  const std::string ctx = "the cat playing the cat";
  const auto a = encode_pair("cat", ctx, v, 64, 8)[0];
  const auto b = encode_pair("cat", ctx, v, 12, 8)[0];
  for (std::size_t k = 0; k < a.context_len; ++k) CHECK(a.ids[a.context_begin + k] == b.ids[b.context_begin + k]);
  CHECK(tokenize_ids(ctx, v) == tokenize_ids(ctx, v));
}

TEST_CASE("build_vocab layout") {
  const std::vector<std::string> corpus = {"b a b", "c b"};
  const Vocab v = build_vocab(corpus);
  for (int i = 0; i < Vocab::kNumSpecials; ++i) CHECK(v.token(i) == Vocab::special_tokens()[i]);
  CHECK(v.contains("##a"));
  CHECK(v.id("b") >= 0);
  CHECK(wordpiece_tokenize("abc", v) == std::vector<std::string>{"a", "##b", "##c"});
}

TEST_CASE("vocab rejects whitespace and empty tokens") {
  CHECK_THROWS_AS(small_vocab({"a b"}), DataError);
  CHECK_THROWS_AS(small_vocab({""}), DataError);
}

TEST_CASE("utf8 helpers") {
  CHECK(text::length("héllo") == 5);
  CHECK(text::substr("héllo wörld", 6, 11) == "wörld");
  CHECK(text::lowercase("ÀÉÎ ĀΣД") == "àéî āσд");
  CHECK(text::decode_utf8("\xff") == std::u32string{0xFFFD});
}

}
