#include "qa/metrics.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "qa/errors.hpp"
#include "qa/text.hpp"

namespace qa {

std::vector<std::string> answer_tokens(std::string_view s) {
  std::u32string cps = text::decode_utf8(s);
  std::vector<std::string> tokens;
  std::u32string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    std::string w = text::encode_utf8(cur);
    if (w != "a" && w != "an" && w != "the") tokens.push_back(std::move(w));
    cur.clear();
  };
  for (char32_t c : cps) {
    if (text::is_punctuation(c)) continue;
    if (text::is_whitespace(c)) {
      flush();
    } else {
      cur.push_back(text::to_lower(c));
    }
  }
  flush();
  return tokens;
}

std::string normalize_answer(std::string_view s) {
  std::string out;
  for (const auto& t : answer_tokens(s)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

double OverlapCounts::precision() const {
  const std::size_t d = true_positive + false_positive;
  return d == 0 ? 0.0 : static_cast<double>(true_positive) / static_cast<double>(d);
}

double OverlapCounts::recall() const {
  const std::size_t d = true_positive + false_negative;
  return d == 0 ? 0.0 : static_cast<double>(true_positive) / static_cast<double>(d);
}

double OverlapCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * (p * r) / (p + r);
}

OverlapCounts overlap_counts(std::string_view prediction, std::string_view gold) {
  const auto pred = answer_tokens(prediction);
  const auto ref = answer_tokens(gold);
  std::unordered_map<std::string, std::size_t> bag;
  for (const auto& t : ref) ++bag[t];
  OverlapCounts c;
  for (const auto& t : pred) {
    auto it = bag.find(t);
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++c.true_positive;
    }
  }
  c.false_positive = pred.size() - c.true_positive;
  c.false_negative = ref.size() - c.true_positive;
  return c;
}

namespace {

double single_f1(std::string_view prediction, std::string_view gold) {
  const OverlapCounts c = overlap_counts(prediction, gold);
  const std::size_t n_pred = c.true_positive + c.false_positive;
  const std::size_t n_gold = c.true_positive + c.false_negative;
  if (n_pred == 0 || n_gold == 0) return n_pred == n_gold ? 1.0 : 0.0;
  return c.f1();
}

}  // namespace

double token_f1(std::string_view prediction, std::span<const std::string> gold_texts) {
  if (gold_texts.empty()) return single_f1(prediction, "");
  double best = 0.0;
  for (const auto& g : gold_texts) best = std::max(best, single_f1(prediction, g));
  return best;
}

int exact_match(std::string_view prediction, std::span<const std::string> gold_texts) {
  const std::string p = normalize_answer(prediction);
  if (gold_texts.empty()) return p.empty() ? 1 : 0;
  for (const auto& g : gold_texts) {
    if (normalize_answer(g) == p) return 1;
  }
  return 0;
}

std::vector<std::string> gold_texts(const QAExample& ex) {
  std::vector<std::string> out;
  if (ex.unanswerable) return out;
  for (const auto& a : ex.answers) out.push_back(a.text);
  return out;
}

MetricResult evaluate(const std::map<std::string, std::string>& prediction_texts, std::span<const QAExample> examples) {
  std::unordered_set<std::string> ids;
  for (const auto& ex : examples) ids.insert(ex.id);
  for (const auto& [id, text] : prediction_texts) {
    if (ids.count(id) == 0) throw DataError("evaluate: prediction for unknown id " + id);
  }
  MetricResult res;
  res.n_examples = examples.size();
  double f1_sum = 0.0, em_sum = 0.0;
  for (const auto& ex : examples) {
    ExampleScore s{ex.id, 0.0, 0};
    if (auto it = prediction_texts.find(ex.id); it != prediction_texts.end()) {
      const auto golds = gold_texts(ex);
      s.f1 = token_f1(it->second, golds);
      s.exact_match = exact_match(it->second, golds);
    }
    f1_sum += s.f1;
    em_sum += s.exact_match;
    res.per_example.push_back(std::move(s));
  }
  if (!examples.empty()) {
    res.f1 = f1_sum / static_cast<double>(examples.size());
    res.exact_match = em_sum / static_cast<double>(examples.size());
  }
  return res;
}

}  // namespace qa
