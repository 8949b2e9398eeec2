#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qa/metrics.hpp"
#include "qa/train.hpp"

namespace qa {

struct CellSummary {
  double f1 = 0.0;
  double em = 0.0;
  std::size_t n = 0;
};

/// Models as rows, datasets as columns. The four reference columns
/// (NewsQA, SQuAD, QuAC, CovidQA) always render first, in that order.
class EvalReport {
 public:
  static const std::vector<std::string>& reference_columns();

  void add_model(const std::string& model);
  void add_dataset(const std::string& dataset);
  void set(const std::string& model, const std::string& dataset, const CellSummary& cell);
  void mark_absent(const std::string& model, const std::string& dataset, const std::string& reason);

  std::optional<CellSummary> cell(const std::string& model, const std::string& dataset) const;
  const std::vector<std::string>& models() const { return models_; }
  std::vector<std::string> datasets() const;
  /// Reasons for cells explicitly marked absent, keyed "model/dataset".
  const std::map<std::string, std::string>& failures() const { return failures_; }

  /// F1 in percent with one decimal; "-" for absent cells.
  std::string render() const;
  /// {model: {dataset: {f1, em, n} | null}}
  std::string to_json() const;
  static EvalReport from_json(const std::string& json_text);

 private:
  std::vector<std::string> models_;
  std::vector<std::string> extra_datasets_;
  std::map<std::pair<std::string, std::string>, CellSummary> cells_;
  std::map<std::string, std::string> failures_;
};

/// Text triplets, or SQuAD JSON when the extension is ".json".
std::vector<QAExample> load_dataset(const std::filesystem::path& path);

struct RunOutcome {
  MetricResult metrics;
  TrainResult training;
};

/// Trains a freshly initialized model (seeded by train.seed) on `train_set`
/// and evaluates it on `eval_set`. `model.encoder.vocab_size` is taken from
/// the vocab.
RunOutcome train_and_evaluate(ModelConfig model, const TrainConfig& train, const DecodeConfig& decode,
                              const Vocab& vocab, std::span<const QAExample> train_set,
                              std::span<const QAExample> eval_set);

struct RunSpec {
  std::string model_name;
  std::string dataset_name;
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  std::filesystem::path train_data;
  /// Empty: evaluate on train_data.
  std::filesystem::path eval_data;
  /// Empty: build a frequency vocab from the training data.
  std::filesystem::path vocab;
  /// Non-empty: evaluate this checkpoint instead of training.
  std::filesystem::path checkpoint;
};

/// Per-cell failures are recorded as absent cells; the report is always returned.
EvalReport benchmark(std::span<const RunSpec> runs);

struct CompareResult {
  double baseline_f1 = 0.0;
  double bilstm_f1 = 0.0;

  double delta_pp() const { return (bilstm_f1 - baseline_f1) * 100.0; }
  /// "baseline=x.xxx bilstm=y.yyy delta=+z.z pp"
  std::string format() const;
};

/// Both configs must agree on everything except the BiLSTM settings.
CompareResult compare(const ModelConfig& baseline, const ModelConfig& bilstm, const TrainConfig& train,
                      const DecodeConfig& decode, const Vocab& vocab, std::span<const QAExample> train_set,
                      std::span<const QAExample> eval_set);

}  // namespace qa
