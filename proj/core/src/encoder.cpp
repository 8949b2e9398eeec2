#include "qa/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "qa/errors.hpp"

namespace qa {

void EncoderConfig::validate() const {
  if (hidden == 0 || heads == 0 || ffn == 0 || vocab_size == 0 || max_positions == 0 || segments == 0) {
    throw ConfigError("encoder: all extents must be >= 1");
  }
  if (hidden % heads != 0) {
    throw ConfigError("encoder: hidden " + std::to_string(hidden) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0, 1)");
}

EncoderLayerWeights EncoderLayerWeights::init(const EncoderConfig& cfg, Rng& rng) {
  EncoderLayerWeights w;
  w.query = Linear::init(cfg.hidden, cfg.hidden, rng);
  w.key = Linear::init(cfg.hidden, cfg.hidden, rng);
  w.value = Linear::init(cfg.hidden, cfg.hidden, rng);
  w.output = Linear::init(cfg.hidden, cfg.hidden, rng);
  w.attn_norm = LayerNormParams::init(cfg.hidden);
  w.ffn_in = Linear::init(cfg.hidden, cfg.ffn, rng);
  w.ffn_out = Linear::init(cfg.ffn, cfg.hidden, rng);
  w.ffn_norm = LayerNormParams::init(cfg.hidden);
  return w;
}

void EncoderLayerWeights::collect(ParamList& out, const std::string& prefix) {
  query.collect(out, prefix + ".attention.query");
  key.collect(out, prefix + ".attention.key");
  value.collect(out, prefix + ".attention.value");
  output.collect(out, prefix + ".attention.output");
  attn_norm.collect(out, prefix + ".attention.norm");
  ffn_in.collect(out, prefix + ".ffn.in");
  ffn_out.collect(out, prefix + ".ffn.out");
  ffn_norm.collect(out, prefix + ".ffn.norm");
}

EncoderWeights EncoderWeights::init(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderWeights w;
  w.token_embedding = Parameter(truncated_normal({cfg.vocab_size, cfg.hidden}, kInitStd, rng));
  w.segment_embedding = Parameter(truncated_normal({cfg.segments, cfg.hidden}, kInitStd, rng));
  w.position_embedding = Parameter(truncated_normal({cfg.max_positions, cfg.hidden}, kInitStd, rng));
  w.embedding_norm = LayerNormParams::init(cfg.hidden);
  const std::size_t blocks = cfg.share_layers ? std::min<std::size_t>(cfg.layers, 1) : cfg.layers;
  for (std::size_t i = 0; i < blocks; ++i) w.blocks.push_back(EncoderLayerWeights::init(cfg, rng));
  return w;
}

void EncoderWeights::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".embedding.token", &token_embedding});
  out.push_back({prefix + ".embedding.segment", &segment_embedding});
  out.push_back({prefix + ".embedding.position", &position_embedding});
  embedding_norm.collect(out, prefix + ".embedding.norm");
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, prefix + ".layer" + std::to_string(i));
}

Var Dropout::apply(Tape& tape, Var x) const {
  if (rng == nullptr || p <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  Tensor mask(x.shape());
  for (auto& m : mask.values) m = keep(*rng) ? 1.0 / (1.0 - p) : 0.0;
  return mul(x, tape.constant(std::move(mask)));
}

Var embed(Tape& tape, EncoderWeights& w, std::span<const int> ids, std::span<const int> segment_ids) {
  if (ids.size() != segment_ids.size()) {
    throw ShapeError("embed: " + std::to_string(ids.size()) + " ids vs " + std::to_string(segment_ids.size()) +
                     " segment ids");
  }
  const std::size_t positions = w.position_embedding.value.rows();
  if (ids.size() > positions) {
    throw std::out_of_range("embed: sequence of " + std::to_string(ids.size()) + " exceeds max positions " +
                            std::to_string(positions));
  }
  std::vector<int> pos(ids.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  Var tok = gather_rows(tape.param(w.token_embedding), ids);
  Var seg = gather_rows(tape.param(w.segment_embedding), segment_ids);
  Var p = gather_rows(tape.param(w.position_embedding), pos);
  return w.embedding_norm.apply(tape, add(add(tok, seg), p));
}

AttentionOutput multi_head_attention(Tape& tape, EncoderLayerWeights& w, Var x, std::span<const int> pad_mask,
                                     std::size_t heads) {
  const std::size_t seq = x.value().rows();
  const std::size_t hidden = x.value().cols();
  if (pad_mask.size() != seq) {
    throw ShapeError("attention: mask length " + std::to_string(pad_mask.size()) + " vs sequence " +
                     std::to_string(seq));
  }
  if (heads == 0 || hidden % heads != 0) throw ShapeError("attention: hidden not divisible by heads");
  const std::size_t dh = hidden / heads;

  Tensor bias(Shape{seq});
  for (std::size_t k = 0; k < seq; ++k) bias.values[k] = pad_mask[k] ? 0.0 : kMaskBias;
  Var key_bias = tape.constant(std::move(bias));

  Var q = w.query.apply(tape, x);
  Var k = w.key.apply(tape, x);
  Var v = w.value.apply(tape, x);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionOutput out;
  std::vector<Var> head_out;
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = add(scale(matmul(qh, transpose(kh)), inv_scale), key_bias);
    Var probs = softmax(scores, 1);
    out.weights.push_back(probs);
    head_out.push_back(matmul(probs, vh));
  }
  out.output = w.output.apply(tape, heads == 1 ? head_out[0] : concat_cols(head_out));
  return out;
}

Var encoder_layer(Tape& tape, EncoderLayerWeights& w, Var x, std::span<const int> pad_mask,
                  const EncoderConfig& cfg, const Dropout& dropout) {
  Var attn = dropout.apply(tape, multi_head_attention(tape, w, x, pad_mask, cfg.heads).output);
  Var h = w.attn_norm.apply(tape, add(x, attn));
  Var ff = w.ffn_out.apply(tape, gelu(w.ffn_in.apply(tape, h)));
  return w.ffn_norm.apply(tape, add(h, dropout.apply(tape, ff)));
}

Var encode(Tape& tape, const Encoding& enc, EncoderWeights& w, const EncoderConfig& cfg, const Dropout& dropout) {
  const std::size_t expected_blocks = cfg.share_layers ? std::min<std::size_t>(cfg.layers, 1) : cfg.layers;
  if (w.blocks.size() != expected_blocks) {
    throw std::invalid_argument("encode: weights hold " + std::to_string(w.blocks.size()) + " blocks, config needs " +
                                std::to_string(expected_blocks));
  }
  Var x = dropout.apply(tape, embed(tape, w, enc.ids, enc.segment_ids));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    EncoderLayerWeights& block = cfg.share_layers ? w.blocks[0] : w.blocks[l];
    x = encoder_layer(tape, block, x, enc.pad_mask, cfg, dropout);
  }
  return x;
}

std::size_t param_count(const EncoderConfig& cfg) {
  const std::size_t h = cfg.hidden, f = cfg.ffn;
  const std::size_t embeddings = (cfg.vocab_size + cfg.segments + cfg.max_positions) * h + 2 * h;
  const std::size_t layer = 4 * (h * h + h) + 2 * (2 * h) + (h * f + f) + (f * h + h);
  const std::size_t blocks = cfg.share_layers ? std::min<std::size_t>(cfg.layers, 1) : cfg.layers;
  return embeddings + blocks * layer;
}

}  // namespace qa
