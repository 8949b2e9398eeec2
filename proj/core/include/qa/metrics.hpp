#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qa/data.hpp"

namespace qa {

/// Lowercase, drop punctuation, drop the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);
std::vector<std::string> answer_tokens(std::string_view s);

struct OverlapCounts {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

/// Multiset overlap of normalized tokens: TP = |pred & gold|,
/// FP = |pred| - TP, FN = |gold| - TP.
OverlapCounts overlap_counts(std::string_view prediction, std::string_view gold);

/// Max F1 over the gold texts. An empty gold list means unanswerable and is
/// scored against the empty string: both empty -> 1, exactly one empty -> 0.
double token_f1(std::string_view prediction, std::span<const std::string> gold_texts);
int exact_match(std::string_view prediction, std::span<const std::string> gold_texts);

std::vector<std::string> gold_texts(const QAExample& ex);

struct ExampleScore {
  std::string id;
  double f1;
  int exact_match;
};

struct MetricResult {
  double f1 = 0.0;
  double exact_match = 0.0;
  std::size_t n_examples = 0;
  std::vector<ExampleScore> per_example;
};

/// Means over all examples; examples without a prediction score 0.
/// Throws DataError on a prediction id that names no example.
MetricResult evaluate(const std::map<std::string, std::string>& prediction_texts, std::span<const QAExample> examples);

}  // namespace qa
