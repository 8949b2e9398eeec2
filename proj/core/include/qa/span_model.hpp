#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qa/encoder.hpp"
#include "qa/recurrent.hpp"
#include "qa/tokenizer.hpp"

namespace qa {

struct ModelConfig {
  EncoderConfig encoder;
  bool use_bilstm = false;
  /// 0 selects hidden / 2.
  std::size_t bilstm_cell = 0;
  OutputActivation bilstm_activation = OutputActivation::kTanh;

  std::size_t cell_dim() const { return bilstm_cell ? bilstm_cell : encoder.hidden / 2; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Encoder, optional BiLSTM, and the start/end scoring vectors.
struct QaModel {
  ModelConfig config;
  EncoderWeights encoder;
  std::optional<BiLstmLayer> bilstm;
  Parameter start_vector;  // [H]
  Parameter end_vector;    // [H]

  static QaModel init(const ModelConfig& cfg, std::uint64_t seed);
  ParamList parameters();
};

struct SpanLogits {
  Var start;  // [seq]
  Var end;    // [seq]
};

/// Token representations reaching the span head: encoder output, or the
/// projected BiLSTM output when enabled.
Var token_representations(Tape& tape, QaModel& model, const Encoding& enc, const Dropout& dropout = {});

/// Logits at padded positions carry kMaskBias.
SpanLogits forward(Tape& tape, QaModel& model, const Encoding& enc, const Dropout& dropout = {});

struct Distributions {
  std::vector<double> start;
  std::vector<double> end;
};

/// Softmax of each logit vector over unpadded positions; padded entries are 0.
Distributions distributions(std::span<const double> start_logits, std::span<const double> end_logits,
                            std::span<const int> pad_mask);

struct DecodeConfig {
  std::size_t max_answer_len = 30;
  double null_threshold = 0.0;
  std::size_t n_best = 5;

  bool operator==(const DecodeConfig&) const = default;
};

struct SpanCandidate {
  std::size_t start;
  std::size_t end;
  double score;
};

struct SpanPrediction {
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 0.0;
  /// start_logits[CLS] + end_logits[CLS].
  double null_score = 0.0;
  std::string text;
  int start_char = -1;
  int end_char = -1;
  bool is_null = true;
  std::vector<SpanCandidate> n_best;
};

/// Best (i, j) over context tokens with j >= i and j - i + 1 <= max_answer_len,
/// ties to the smallest i then smallest j. Returns null when the [CLS] score
/// exceeds best - null_threshold.
SpanPrediction decode_best_span(std::span<const double> start_logits, std::span<const double> end_logits,
                                const Encoding& enc, const DecodeConfig& cfg, std::string_view context);

/// Mean of the start and end cross-entropies.
Var qa_loss(Var start_logits, Var end_logits, std::size_t gold_start, std::size_t gold_end);

/// Across windows of one example the non-null window with the largest
/// (score - null_score) wins; null only if every window is null.
SpanPrediction aggregate_windows(std::span<const SpanPrediction> windows);

}  // namespace qa
