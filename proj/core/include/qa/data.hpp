#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qa/tokenizer.hpp"

namespace qa {

struct Answer {
  std::string text;
  /// Code-point offset into the context.
  int char_start = 0;

  bool operator==(const Answer&) const = default;
};

struct QAExample {
  std::string id;
  std::string context;
  std::string question;
  std::vector<Answer> answers;
  bool unanswerable = false;

  bool operator==(const QAExample&) const = default;
};

/// Throws DataError (naming the id) if an answer does not match its offset
/// or an unanswerable example carries answers.
void validate_example(const QAExample& ex);

/// SQuAD 2.0 schema: data -> paragraphs -> qas.
std::vector<QAExample> load_squad_json(const std::filesystem::path& path);
std::vector<QAExample> parse_squad_json(const std::string& json_text);

struct LoadError {
  std::size_t line;
  std::string message;
};

struct TripletLoad {
  std::vector<QAExample> examples;
  std::vector<LoadError> errors;
};

/// Line-delimited {id, context, question, answers[{text, char_start}],
/// unanswerable}. Strict mode throws DataError on the first bad line;
/// permissive mode skips it and records the error.
TripletLoad load_triplets(const std::filesystem::path& path, bool permissive = false);
void save_triplets(std::span<const QAExample> examples, const std::filesystem::path& path);
std::string triplet_line(const QAExample& ex);

/// One packed window with token-aligned labels. Both labels equal the [CLS]
/// position (0) when the window does not fully contain the answer.
struct TrainFeature {
  std::string example_id;
  std::size_t window_index = 0;
  Encoding encoding;
  std::size_t start_pos = 0;
  std::size_t end_pos = 0;

  bool has_answer() const { return start_pos != 0; }
};

std::vector<TrainFeature> build_features(const QAExample& ex, const Vocab& vocab,
                                         std::size_t max_len = kDefaultMaxLen,
                                         std::size_t overlap = kDefaultOverlap);

std::vector<TrainFeature> build_features(std::span<const QAExample> examples, const Vocab& vocab,
                                         std::size_t max_len, std::size_t overlap);

/// Marker task: two bracket pairs (ma..xa, mb..xb) sit in a filler context;
/// the question names one pair ("qa" or "qb") and the answer is the filler
/// run between that pair's markers.
struct SyntheticSpec {
  std::size_t vocab_size = 64;
  std::size_t context_len = 24;
  std::size_t examples = 64;
  std::uint64_t seed = 7;
  std::size_t max_answer_tokens = 4;
};

struct SyntheticData {
  std::vector<QAExample> train;
  std::vector<QAExample> dev;
};

Vocab synthetic_vocab(const SyntheticSpec& spec);
SyntheticData make_synthetic(const SyntheticSpec& spec);

inline constexpr int kIgnoreLabel = -100;

struct MlmConfig {
  double mask_prob = 0.15;
  double mask_token_ratio = 0.8;
  double random_token_ratio = 0.1;
};

struct MlmExample {
  std::vector<int> ids;
  /// Original id at selected positions, kIgnoreLabel elsewhere.
  std::vector<int> labels;
};

MlmExample mlm_mask(std::span<const int> ids, const Vocab& vocab, const MlmConfig& cfg, std::uint64_t seed);

struct NspPair {
  std::vector<int> first;
  std::vector<int> second;
  bool is_next;
};

/// Balanced next-sentence pairs: half true successors, half random seconds.
/// `count` = 0 yields 2 * (segments - 1) pairs.
std::vector<NspPair> nsp_pairs(std::span<const std::vector<int>> segments, std::uint64_t seed, std::size_t count = 0);

}  // namespace qa
