#include "qa/data.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "qa/errors.hpp"
#include "qa/nn.hpp"
#include "qa/text.hpp"

namespace qa {

using json = nlohmann::json;

void validate_example(const QAExample& ex) {
  if (ex.unanswerable && !ex.answers.empty()) {
    throw DataError("example " + ex.id + ": unanswerable but has answers");
  }
  const std::u32string ctx = text::decode_utf8(ex.context);
  for (const auto& a : ex.answers) {
    const std::u32string ans = text::decode_utf8(a.text);
    if (a.char_start < 0 || static_cast<std::size_t>(a.char_start) + ans.size() > ctx.size() ||
        ctx.compare(static_cast<std::size_t>(a.char_start), ans.size(), ans) != 0) {
      throw DataError("example " + ex.id + ": answer '" + a.text + "' not found at offset " +
                      std::to_string(a.char_start));
    }
  }
}

namespace {

void check_unique(std::unordered_set<std::string>& seen, const std::string& id) {
  if (!seen.insert(id).second) throw DataError("duplicate example id " + id);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<QAExample> parse_squad_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("squad: malformed JSON: ") + e.what());
  }
  std::vector<QAExample> out;
  std::unordered_set<std::string> seen;
  try {
    for (const auto& article : doc.at("data")) {
      for (const auto& para : article.at("paragraphs")) {
        const std::string context = para.at("context").get<std::string>();
        for (const auto& qa : para.at("qas")) {
          QAExample ex;
          ex.id = qa.at("id").get<std::string>();
          ex.context = context;
          ex.question = qa.at("question").get<std::string>();
          ex.unanswerable = qa.value("is_impossible", false);
          if (!ex.unanswerable) {
            for (const auto& a : qa.at("answers")) {
              ex.answers.push_back({a.at("text").get<std::string>(), a.at("answer_start").get<int>()});
            }
            if (ex.answers.empty()) throw DataError("squad: example " + ex.id + " is answerable but has no answers");
          }
          validate_example(ex);
          check_unique(seen, ex.id);
          out.push_back(std::move(ex));
        }
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("squad: schema error: ") + e.what());
  }
  return out;
}

std::vector<QAExample> load_squad_json(const std::filesystem::path& path) { return parse_squad_json(read_file(path)); }

namespace {

QAExample parse_triplet(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record is not an object");
  auto require = [&j](const char* key, bool (json::*check)() const noexcept, const char* kind) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw DataError(std::string("missing field \"") + key + "\"");
    if (!((*it).*check)()) throw DataError(std::string("field \"") + key + "\" must be " + kind);
    return *it;
  };
  QAExample ex;
  ex.id = require("id", &json::is_string, "a string").get<std::string>();
  ex.context = require("context", &json::is_string, "a string").get<std::string>();
  ex.question = require("question", &json::is_string, "a string").get<std::string>();
  for (const auto& a : require("answers", &json::is_array, "an array")) {
    if (!a.is_object() || !a.contains("text") || !a.contains("char_start") || !a["text"].is_string() ||
        !a["char_start"].is_number_integer()) {
      throw DataError("answers entries need string \"text\" and integer \"char_start\"");
    }
    ex.answers.push_back({a["text"].get<std::string>(), a["char_start"].get<int>()});
  }
  ex.unanswerable = require("unanswerable", &json::is_boolean, "a boolean").get<bool>();
  validate_example(ex);
  return ex;
}

}  // namespace

TripletLoad load_triplets(const std::filesystem::path& path, bool permissive) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  TripletLoad out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      QAExample ex = parse_triplet(line);
      check_unique(seen, ex.id);
      out.examples.push_back(std::move(ex));
    } catch (const DataError& e) {
      std::string msg = path.string() + ":" + std::to_string(lineno) + ": " + e.what();
      if (!permissive) throw DataError(msg);
      out.errors.push_back({lineno, std::move(msg)});
    }
  }
  return out;
}

std::string triplet_line(const QAExample& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["context"] = ex.context;
  j["question"] = ex.question;
  j["answers"] = nlohmann::ordered_json::array();
  for (const auto& a : ex.answers) {
    nlohmann::ordered_json aj;
    aj["text"] = a.text;
    aj["char_start"] = a.char_start;
    j["answers"].push_back(aj);
  }
  j["unanswerable"] = ex.unanswerable;
  return j.dump();
}

void save_triplets(std::span<const QAExample> examples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& ex : examples) out << triplet_line(ex) << '\n';
}

std::vector<TrainFeature> build_features(const QAExample& ex, const Vocab& vocab, std::size_t max_len,
                                         std::size_t overlap) {
  const std::vector<int> q = tokenize_ids(ex.question, vocab);
  const std::vector<TokenSpan> ctx = tokenize_with_offsets(ex.context, vocab);
  std::vector<Encoding> windows = encode_tokens(q, ctx, max_len, overlap);

  // Gold answer as a token range over the full context, if it aligns.
  bool aligned = false;
  std::size_t gold_first = 0, gold_last = 0;
  if (!ex.unanswerable && !ex.answers.empty()) {
    const Answer& a = ex.answers.front();
    const int cs = a.char_start;
    const int ce = cs + static_cast<int>(text::length(a.text));
    bool have_first = false;
    for (std::size_t k = 0; k < ctx.size(); ++k) {
      if (!have_first && ctx[k].char_end > cs) {
        gold_first = k;
        have_first = true;
      }
      if (ctx[k].char_start < ce) gold_last = k;
    }
    aligned = have_first && gold_first <= gold_last && ctx[gold_first].char_start < ce;
  }

  std::vector<TrainFeature> out;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    TrainFeature f;
    f.example_id = ex.id;
    f.window_index = w;
    f.encoding = std::move(windows[w]);
    const Encoding& enc = f.encoding;
    if (aligned && gold_first >= enc.window_start && gold_last < enc.window_start + enc.context_len) {
      f.start_pos = enc.context_begin + (gold_first - enc.window_start);
      f.end_pos = enc.context_begin + (gold_last - enc.window_start);
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<TrainFeature> build_features(std::span<const QAExample> examples, const Vocab& vocab, std::size_t max_len,
                                         std::size_t overlap) {
  std::vector<TrainFeature> out;
  for (const auto& ex : examples) {
    auto f = build_features(ex, vocab, max_len, overlap);
    std::move(f.begin(), f.end(), std::back_inserter(out));
  }
  return out;
}

// ---- synthetic marker task ----------------------------------------------

namespace {

const char* const kMarkerTokens[] = {"ma", "xa", "mb", "xb", "qa", "qb"};
constexpr std::size_t kNumMarkerTokens = 6;
constexpr std::size_t kMinFillers = 8;

std::size_t filler_count(const SyntheticSpec& spec) {
  const std::size_t reserved = Vocab::kNumSpecials + kNumMarkerTokens;
  if (spec.vocab_size < reserved + kMinFillers) {
    throw std::invalid_argument("synthetic: vocab_size " + std::to_string(spec.vocab_size) + " leaves fewer than " +
                                std::to_string(kMinFillers) + " filler words");
  }
  return spec.vocab_size - reserved;
}

bool occurs_elsewhere(const std::vector<std::string>& ctx, std::size_t begin, std::size_t len) {
  for (std::size_t s = 0; s + len <= ctx.size(); ++s) {
    if (s == begin) continue;
    if (std::equal(ctx.begin() + static_cast<std::ptrdiff_t>(begin), ctx.begin() + static_cast<std::ptrdiff_t>(begin + len),
                   ctx.begin() + static_cast<std::ptrdiff_t>(s))) {
      return true;
    }
  }
  return false;
}

}  // namespace

Vocab synthetic_vocab(const SyntheticSpec& spec) {
  std::vector<std::string> tokens = Vocab::special_tokens();
  for (const char* m : kMarkerTokens) tokens.emplace_back(m);
  const std::size_t fillers = filler_count(spec);
  for (std::size_t i = 0; i < fillers; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocab(std::move(tokens));
}

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  const std::size_t fillers = filler_count(spec);
  if (spec.max_answer_tokens == 0) throw std::invalid_argument("synthetic: max_answer_tokens must be >= 1");
  if (spec.context_len < 6) {
    throw std::invalid_argument("synthetic: context of " + std::to_string(spec.context_len) +
                                " tokens is too short for two marker pairs");
  }
  Rng rng(spec.seed);
  auto uniform = [&rng](std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  std::vector<QAExample> all;
  for (std::size_t n = 0; n < spec.examples; ++n) {
    for (;;) {
      const std::size_t budget = spec.context_len - 4;
      const std::size_t cap = std::min(spec.max_answer_tokens, budget - 1);
      const std::size_t len_a = uniform(1, cap);
      const std::size_t len_b = uniform(1, std::min(spec.max_answer_tokens, budget - len_a));
      std::size_t spare = budget - len_a - len_b;
      const std::size_t gap0 = uniform(0, spare);
      spare -= gap0;
      const std::size_t gap1 = uniform(0, spare);
      const bool a_first = uniform(0, 1) == 0;

      std::vector<std::string> ctx;
      auto fill = [&](std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) ctx.push_back("w" + std::to_string(uniform(0, fillers - 1)));
      };
      std::size_t begin_a = 0, begin_b = 0;
      auto pair = [&](bool is_a) {
        ctx.push_back(is_a ? "ma" : "mb");
        (is_a ? begin_a : begin_b) = ctx.size();
        fill(is_a ? len_a : len_b);
        ctx.push_back(is_a ? "xa" : "xb");
      };
      fill(gap0);
      pair(a_first);
      fill(gap1);
      pair(!a_first);
      fill(spec.context_len - ctx.size());

      const bool ask_a = uniform(0, 1) == 0;
      const std::size_t begin = ask_a ? begin_a : begin_b;
      const std::size_t len = ask_a ? len_a : len_b;
      if (occurs_elsewhere(ctx, begin, len)) continue;

      QAExample ex;
      ex.id = "synth-" + std::to_string(spec.seed) + "-" + std::to_string(n);
      ex.question = ask_a ? "qa" : "qb";
      std::size_t char_start = 0;
      std::string answer;
      for (std::size_t i = 0; i < ctx.size(); ++i) {
        if (i) ex.context += ' ';
        if (i == begin) char_start = ex.context.size();
        ex.context += ctx[i];
        if (i >= begin && i < begin + len) {
          if (i > begin) answer += ' ';
          answer += ctx[i];
        }
      }
      ex.answers.push_back({answer, static_cast<int>(char_start)});
      validate_example(ex);
      all.push_back(std::move(ex));
      break;
    }
  }
  const std::size_t n_train = spec.examples * 4 / 5;
  SyntheticData out;
  out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.dev.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  return out;
}

// ---- pre-training example construction ----------------------------------

MlmExample mlm_mask(std::span<const int> ids, const Vocab& vocab, const MlmConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool can_randomize = vocab.size() > static_cast<std::size_t>(Vocab::kNumSpecials);
  std::uniform_int_distribution<int> random_id(Vocab::kNumSpecials,
                                               can_randomize ? static_cast<int>(vocab.size()) - 1 : Vocab::kNumSpecials);
  MlmExample out{std::vector<int>(ids.begin(), ids.end()), std::vector<int>(ids.size(), kIgnoreLabel)};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (Vocab::is_special(ids[i])) continue;
    if (unit(rng) >= cfg.mask_prob) continue;
    out.labels[i] = ids[i];
    const double r = unit(rng);
    if (r < cfg.mask_token_ratio) {
      out.ids[i] = Vocab::kMask;
    } else if (r < cfg.mask_token_ratio + cfg.random_token_ratio && can_randomize) {
      out.ids[i] = random_id(rng);
    }
  }
  return out;
}

std::vector<NspPair> nsp_pairs(std::span<const std::vector<int>> segments, std::uint64_t seed, std::size_t count) {
  const std::size_t n = segments.size();
  if (n < 2) throw std::invalid_argument("nsp_pairs: need at least 2 segments, got " + std::to_string(n));
  if (count == 0) count = 2 * (n - 1);
  Rng rng(seed);
  std::vector<bool> labels(count, false);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>((count + 1) / 2), true);
  std::shuffle(labels.begin(), labels.end(), rng);

  auto pick = [&rng](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  std::vector<NspPair> out;
  out.reserve(count);
  for (bool is_next : labels) {
    if (is_next) {
      const std::size_t a = pick(0, n - 2);
      out.push_back({segments[a], segments[a + 1], true});
      continue;
    }
    // Any second segment other than the first itself and its true successor.
    for (;;) {
      const std::size_t a = pick(0, n - 1);
      std::vector<std::size_t> choices;
      for (std::size_t b = 0; b < n; ++b) {
        if (b != a && b != a + 1) choices.push_back(b);
      }
      if (choices.empty()) continue;
      const std::size_t b = choices[pick(0, choices.size() - 1)];
      out.push_back({segments[a], segments[b], false});
      break;
    }
  }
  return out;
}

}  // namespace qa
