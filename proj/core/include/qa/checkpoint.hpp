#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "qa/span_model.hpp"
#include "qa/tokenizer.hpp"

namespace qa {

/// Text checkpoint, version 1:
///
///   qa-checkpoint 1
///   config <n>
///   <key>=<value>                  (n lines, sorted by key)
///   vocab <n>
///   <token>                        (n lines, id order)
///   tensors <n>
///   <name> <rank> <d0> ... <dk>    (per tensor, in ParamList order)
///   <v0> <v1> ...                  (one line, shortest round-trip decimals)
///
/// BiLSTM tensors live under the "bilstm." prefix; a checkpoint without them
/// describes an encoder-only model.
struct Checkpoint {
  QaModel model;
  Vocab vocab;
};

std::map<std::string, std::string> model_config_entries(const ModelConfig& cfg);
ModelConfig model_config_from_entries(const std::map<std::string, std::string>& entries);

void write_checkpoint(std::ostream& os, QaModel& model, const Vocab& vocab);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, QaModel& model, const Vocab& vocab);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qa
