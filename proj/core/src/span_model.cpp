#include "qa/span_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qa/errors.hpp"

namespace qa {

void ModelConfig::validate() const {
  encoder.validate();
  if (use_bilstm && cell_dim() == 0) throw ConfigError("model: BiLSTM cell size must be >= 1");
}

QaModel QaModel::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  QaModel m;
  m.config = cfg;
  m.encoder = EncoderWeights::init(cfg.encoder, rng);
  if (cfg.use_bilstm) {
    m.bilstm = BiLstmLayer::init(cfg.encoder.hidden, cfg.cell_dim(), cfg.encoder.hidden, rng, cfg.bilstm_activation);
  }
  m.start_vector = Parameter(truncated_normal({cfg.encoder.hidden}, kInitStd, rng));
  m.end_vector = Parameter(truncated_normal({cfg.encoder.hidden}, kInitStd, rng));
  return m;
}

ParamList QaModel::parameters() {
  ParamList out;
  encoder.collect(out, "encoder");
  if (bilstm) bilstm->collect(out, "bilstm");
  out.push_back({"head.start", &start_vector});
  out.push_back({"head.end", &end_vector});
  return out;
}

Var token_representations(Tape& tape, QaModel& model, const Encoding& enc, const Dropout& dropout) {
  if (model.config.use_bilstm != model.bilstm.has_value()) {
    throw std::logic_error("model: use_bilstm flag disagrees with the presence of BiLSTM weights");
  }
  Var t = encode(tape, enc, model.encoder, model.config.encoder, dropout);
  if (model.bilstm) {
    BiLstmOutput a = bilstm(tape, t, enc.pad_mask, *model.bilstm);
    t = project(tape, a.forward, a.backward, *model.bilstm);
  }
  return t;
}

SpanLogits forward(Tape& tape, QaModel& model, const Encoding& enc, const Dropout& dropout) {
  Var t = token_representations(tape, model, enc, dropout);
  const std::size_t seq = enc.length();
  const std::size_t width = t.value().cols();
  if (model.start_vector.value.size() != width || model.end_vector.value.size() != width) {
    throw ShapeError("forward: head vectors " + shape_str(model.start_vector.value.shape) +
                     " do not match token width " + std::to_string(width));
  }
  Tensor bias(Shape{seq});
  for (std::size_t i = 0; i < seq; ++i) bias.values[i] = enc.pad_mask[i] ? 0.0 : kMaskBias;
  Var mask = tape.constant(std::move(bias));
  Var s = reshape(tape.param(model.start_vector), {width, 1});
  Var e = reshape(tape.param(model.end_vector), {width, 1});
  return {add(reshape(matmul(t, s), {seq}), mask), add(reshape(matmul(t, e), {seq}), mask)};
}

namespace {

std::vector<double> masked_softmax(std::span<const double> logits, std::span<const int> pad_mask) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (pad_mask[i]) mx = std::max(mx, logits[i]);
  }
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!pad_mask[i]) continue;
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

}  // namespace

Distributions distributions(std::span<const double> start_logits, std::span<const double> end_logits,
                            std::span<const int> pad_mask) {
  if (start_logits.size() != pad_mask.size() || end_logits.size() != pad_mask.size()) {
    throw ShapeError("distributions: logits and mask lengths differ");
  }
  if (std::none_of(pad_mask.begin(), pad_mask.end(), [](int m) { return m != 0; })) {
    throw std::invalid_argument("distributions: every position is padded");
  }
  return {masked_softmax(start_logits, pad_mask), masked_softmax(end_logits, pad_mask)};
}

SpanPrediction decode_best_span(std::span<const double> start_logits, std::span<const double> end_logits,
                                const Encoding& enc, const DecodeConfig& cfg, std::string_view context) {
  if (cfg.max_answer_len == 0) throw ConfigError("decode: max_answer_len must be >= 1");
  if (start_logits.size() != enc.length() || end_logits.size() != enc.length()) {
    throw ShapeError("decode: logits length does not match encoding");
  }
  if (enc.context_len == 0) throw std::invalid_argument("decode: window has no context tokens");

  const std::size_t lo = enc.context_begin;
  const std::size_t hi = enc.context_begin + enc.context_len;
  std::vector<SpanCandidate> candidates;
  SpanCandidate best{lo, lo, -std::numeric_limits<double>::infinity()};
  bool found = false;
  for (std::size_t i = lo; i < hi; ++i) {
    const std::size_t j_end = std::min(hi, i + cfg.max_answer_len);
    for (std::size_t j = i; j < j_end; ++j) {
      const double s = start_logits[i] + end_logits[j];
      if (!found || s > best.score) {
        best = {i, j, s};
        found = true;
      }
      if (cfg.n_best > 0) candidates.push_back({i, j, s});
    }
  }

  SpanPrediction pred;
  pred.null_score = start_logits[0] + end_logits[0];
  pred.start = best.start;
  pred.end = best.end;
  pred.score = best.score;
  if (cfg.n_best > 0) {
    const std::size_t keep = std::min(cfg.n_best, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [](const SpanCandidate& a, const SpanCandidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.start != b.start) return a.start < b.start;
                        return a.end < b.end;
                      });
    candidates.resize(keep);
    pred.n_best = std::move(candidates);
  }
  pred.is_null = pred.null_score > best.score - cfg.null_threshold;
  if (!pred.is_null) {
    pred.text = decode_span(enc, best.start, best.end, context);
    pred.start_char = enc.offsets[best.start].start;
    pred.end_char = enc.offsets[best.end].end;
  }
  return pred;
}

Var qa_loss(Var start_logits, Var end_logits, std::size_t gold_start, std::size_t gold_end) {
  return scale(add(cross_entropy(start_logits, gold_start), cross_entropy(end_logits, gold_end)), 0.5);
}

SpanPrediction aggregate_windows(std::span<const SpanPrediction> windows) {
  if (windows.empty()) throw std::invalid_argument("aggregate_windows: no windows");
  const SpanPrediction* best = nullptr;
  for (const auto& w : windows) {
    if (w.is_null) continue;
    if (best == nullptr || w.score - w.null_score > best->score - best->null_score) best = &w;
  }
  if (best != nullptr) return *best;
  // Every window prefers null: keep the window whose null margin is largest.
  const SpanPrediction* most_null = &windows[0];
  for (const auto& w : windows) {
    if (w.null_score - w.score > most_null->null_score - most_null->score) most_null = &w;
  }
  SpanPrediction out = *most_null;
  out.text.clear();
  out.start_char = out.end_char = -1;
  return out;
}

}  // namespace qa
