#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qa/nn.hpp"
#include "qa/tokenizer.hpp"

namespace qa {

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 2;
  std::size_t ffn = 128;
  std::size_t vocab_size = 0;
  std::size_t max_positions = 512;
  std::size_t segments = 2;
  /// ALBERT-style: one layer block applied `layers` times.
  bool share_layers = false;
  double dropout = 0.0;

  void validate() const;
  std::size_t head_dim() const { return hidden / heads; }
  bool operator==(const EncoderConfig&) const = default;
};

struct EncoderLayerWeights {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  LayerNormParams attn_norm;
  Linear ffn_in;
  Linear ffn_out;
  LayerNormParams ffn_norm;

  static EncoderLayerWeights init(const EncoderConfig& cfg, Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

struct EncoderWeights {
  Parameter token_embedding;
  Parameter segment_embedding;
  Parameter position_embedding;
  LayerNormParams embedding_norm;
  /// One block when the config shares layers, otherwise one per layer.
  std::vector<EncoderLayerWeights> blocks;

  static EncoderWeights init(const EncoderConfig& cfg, Rng& rng);
  void collect(ParamList& out, const std::string& prefix = "encoder");
};

/// Optional inverted dropout; inactive unless a generator is supplied and p > 0.
struct Dropout {
  double p = 0.0;
  Rng* rng = nullptr;

  Var apply(Tape& tape, Var x) const;
};

Var embed(Tape& tape, EncoderWeights& w, std::span<const int> ids, std::span<const int> segment_ids);

/// Large negative additive bias used for masked positions. Finite so every
/// tensor stays finite; exp() of it underflows to exactly zero.
inline constexpr double kMaskBias = -1e9;

struct AttentionOutput {
  Var output;
  /// Per-head [seq x seq] attention weights.
  std::vector<Var> weights;
};

AttentionOutput multi_head_attention(Tape& tape, EncoderLayerWeights& w, Var x, std::span<const int> pad_mask,
                                     std::size_t heads);

/// Post-norm block: LN(x + Attn(x)), then LN(h + FFN(h)) with gelu.
Var encoder_layer(Tape& tape, EncoderLayerWeights& w, Var x, std::span<const int> pad_mask,
                  const EncoderConfig& cfg, const Dropout& dropout = {});

Var encode(Tape& tape, const Encoding& enc, EncoderWeights& w, const EncoderConfig& cfg,
           const Dropout& dropout = {});

std::size_t param_count(const EncoderConfig& cfg);

}  // namespace qa
