#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qa/data.hpp"
#include "qa/span_model.hpp"

namespace qa {

struct TrainConfig {
  double lr = 5e-5;
  std::size_t epochs = 3;
  std::size_t batch_size = 8;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t overlap = kDefaultOverlap;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LossRecord {
  std::size_t step;
  std::size_t epoch;
  double loss;
};

struct TrainResult {
  std::vector<LossRecord> history;
  std::size_t steps = 0;
};

/// Called after every epoch with (epoch, mean loss over the epoch's steps).
using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// epochs x ceil(n / batch_size) Adam steps on the mean qa_loss of each
/// batch. Shuffling and dropout draw from a generator seeded by cfg.seed.
/// Throws NumericError naming the step if a loss is not finite.
TrainResult train(QaModel& model, std::span<const TrainFeature> features, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

void write_loss_csv(std::ostream& os, std::span<const LossRecord> history);

using Predictions = std::map<std::string, SpanPrediction>;

/// Predicts every example (aggregating across its windows).
Predictions predict_dataset(QaModel& model, std::span<const QAExample> examples, const Vocab& vocab,
                            const DecodeConfig& decode, std::size_t max_len = kDefaultMaxLen,
                            std::size_t overlap = kDefaultOverlap);

/// JSON object keyed by example id; each value lists text, start_char,
/// end_char, is_null, score in that order.
std::string predictions_json(const Predictions& preds);
/// Reads the same layout back as id -> answer text ("" for null).
std::map<std::string, std::string> parse_prediction_texts(const std::string& json_text);

}  // namespace qa
