#include "qa/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "qa/errors.hpp"
#include "qa/optim.hpp"

namespace qa {

void TrainConfig::validate() const {
  if (lr <= 0.0 || !std::isfinite(lr)) throw ConfigError("train: lr must be positive");
  if (epochs == 0 || batch_size == 0 || max_len == 0) throw ConfigError("train: epochs, batch_size, max_len must be >= 1");
}

TrainResult train(QaModel& model, std::span<const TrainFeature> features, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (features.empty()) throw DataError("train: empty dataset");

  Rng rng(cfg.seed);
  const Dropout dropout{model.config.encoder.dropout, model.config.encoder.dropout > 0.0 ? &rng : nullptr};
  const ParamList named = model.parameters();
  const std::vector<Parameter*> params = raw_params(named);
  AdamState adam;
  adam.lr = cfg.lr;

  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(e - b);
      for (Parameter* p : params) p->zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = b; k < e; ++k) {
        const TrainFeature& f = features[order[k]];
        Tape tape;
        SpanLogits logits = forward(tape, model, f.encoding, dropout);
        Var loss = scale(qa_loss(logits.start, logits.end, f.start_pos, f.end_pos), inv);
        batch_loss += loss.value().item();
        tape.backward(loss);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: non-finite loss at step " + std::to_string(result.steps));
      }
      adam_step(params, adam);
      result.history.push_back({result.steps, epoch, batch_loss});
      ++result.steps;
      epoch_loss += batch_loss;
      ++epoch_steps;
    }
    if (on_epoch) on_epoch(epoch, epoch_loss / static_cast<double>(epoch_steps));
  }
  return result;
}

void write_loss_csv(std::ostream& os, std::span<const LossRecord> history) {
  os << "step,epoch,loss\n";
  for (const auto& r : history) os << r.step << ',' << r.epoch << ',' << format_double(r.loss) << '\n';
}

Predictions predict_dataset(QaModel& model, std::span<const QAExample> examples, const Vocab& vocab,
                            const DecodeConfig& decode, std::size_t max_len, std::size_t overlap) {
  Predictions out;
  for (const auto& ex : examples) {
    const std::vector<int> q = tokenize_ids(ex.question, vocab);
    const std::vector<TokenSpan> ctx = tokenize_with_offsets(ex.context, vocab);
    std::vector<SpanPrediction> windows;
    for (const Encoding& enc : encode_tokens(q, ctx, max_len, overlap)) {
      if (enc.context_len == 0) continue;
      Tape tape;
      SpanLogits logits = forward(tape, model, enc);
      windows.push_back(decode_best_span(logits.start.value().values, logits.end.value().values, enc, decode,
                                         ex.context));
    }
    SpanPrediction pred;
    if (!windows.empty()) pred = aggregate_windows(windows);
    if (!out.emplace(ex.id, std::move(pred)).second) throw DataError("predict: duplicate example id " + ex.id);
  }
  return out;
}

std::string predictions_json(const Predictions& preds) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [id, p] : preds) {
    nlohmann::ordered_json j;
    j["text"] = p.is_null ? "" : p.text;
    j["start_char"] = p.is_null ? -1 : p.start_char;
    j["end_char"] = p.is_null ? -1 : p.end_char;
    j["is_null"] = p.is_null;
    j["score"] = p.is_null ? p.null_score : p.score;
    doc[id] = std::move(j);
  }
  return doc.dump(2) + "\n";
}

std::map<std::string, std::string> parse_prediction_texts(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("predictions: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("predictions: top level must be an object keyed by id");
  std::map<std::string, std::string> out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& v = it.value();
    if (v.is_string()) {
      out[it.key()] = v.get<std::string>();
    } else if (v.is_object() && v.contains("text") && v["text"].is_string()) {
      const bool is_null = v.value("is_null", false);
      out[it.key()] = is_null ? std::string() : v["text"].get<std::string>();
    } else {
      throw DataError("predictions: entry " + it.key() + " has no text");
    }
  }
  return out;
}

}  // namespace qa
