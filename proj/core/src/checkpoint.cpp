#include "qa/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "qa/errors.hpp"

namespace qa {

namespace {

constexpr const char* kMagic = "qa-checkpoint";
constexpr int kVersion = 1;

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw DataError("checkpoint: bad integer for " + key);
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw DataError("checkpoint: bad number for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw DataError("checkpoint: bad boolean for " + key);
}

std::string expect_line(std::istream& is, const char* what) {
  std::string line;
  if (!std::getline(is, line)) throw DataError(std::string("checkpoint: truncated before ") + what);
  return line;
}

std::size_t expect_section(std::istream& is, const std::string& name) {
  std::istringstream ls(expect_line(is, name.c_str()));
  std::string tag;
  std::size_t n = 0;
  if (!(ls >> tag >> n) || tag != name) throw DataError("checkpoint: expected section '" + name + "'");
  return n;
}

}  // namespace

std::map<std::string, std::string> model_config_entries(const ModelConfig& cfg) {
  const EncoderConfig& e = cfg.encoder;
  return {
      {"encoder.layers", std::to_string(e.layers)},
      {"encoder.hidden", std::to_string(e.hidden)},
      {"encoder.heads", std::to_string(e.heads)},
      {"encoder.ffn", std::to_string(e.ffn)},
      {"encoder.vocab_size", std::to_string(e.vocab_size)},
      {"encoder.max_positions", std::to_string(e.max_positions)},
      {"encoder.segments", std::to_string(e.segments)},
      {"encoder.share_layers", bool_str(e.share_layers)},
      {"encoder.dropout", format_double(e.dropout)},
      {"model.use_bilstm", bool_str(cfg.use_bilstm)},
      {"model.bilstm_cell", std::to_string(cfg.bilstm_cell)},
      {"model.bilstm_activation", cfg.bilstm_activation == OutputActivation::kTanh ? "tanh" : "identity"},
  };
}

ModelConfig model_config_from_entries(const std::map<std::string, std::string>& entries) {
  auto get = [&entries](const std::string& key) -> const std::string& {
    auto it = entries.find(key);
    if (it == entries.end()) throw DataError("checkpoint: missing config key " + key);
    return it->second;
  };
  ModelConfig cfg;
  EncoderConfig& e = cfg.encoder;
  e.layers = parse_size("encoder.layers", get("encoder.layers"));
  e.hidden = parse_size("encoder.hidden", get("encoder.hidden"));
  e.heads = parse_size("encoder.heads", get("encoder.heads"));
  e.ffn = parse_size("encoder.ffn", get("encoder.ffn"));
  e.vocab_size = parse_size("encoder.vocab_size", get("encoder.vocab_size"));
  e.max_positions = parse_size("encoder.max_positions", get("encoder.max_positions"));
  e.segments = parse_size("encoder.segments", get("encoder.segments"));
  e.share_layers = parse_bool("encoder.share_layers", get("encoder.share_layers"));
  e.dropout = parse_double("encoder.dropout", get("encoder.dropout"));
  cfg.use_bilstm = parse_bool("model.use_bilstm", get("model.use_bilstm"));
  cfg.bilstm_cell = parse_size("model.bilstm_cell", get("model.bilstm_cell"));
  const std::string& act = get("model.bilstm_activation");
  if (act == "tanh") {
    cfg.bilstm_activation = OutputActivation::kTanh;
  } else if (act == "identity") {
    cfg.bilstm_activation = OutputActivation::kIdentity;
  } else {
    throw DataError("checkpoint: unknown activation " + act);
  }
  return cfg;
}

void write_checkpoint(std::ostream& os, QaModel& model, const Vocab& vocab) {
  const auto entries = model_config_entries(model.config);
  os << kMagic << ' ' << kVersion << '\n';
  os << "config " << entries.size() << '\n';
  for (const auto& [k, v] : entries) os << k << '=' << v << '\n';
  os << "vocab " << vocab.size() << '\n';
  for (const auto& tok : vocab.tokens()) os << tok << '\n';
  const ParamList params = model.parameters();
  os << "tensors " << params.size() << '\n';
  for (const auto& np : params) {
    const Tensor& t = np.param->value;
    os << np.name << ' ' << t.rank();
    for (auto d : t.shape) os << ' ' << d;
    os << '\n';
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      if (i) os << ' ';
      os << format_double(t.values[i]);
    }
    os << '\n';
  }
}

Checkpoint read_checkpoint(std::istream& is) {
  {
    std::istringstream ls(expect_line(is, "header"));
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != kMagic) throw DataError("checkpoint: not a qa checkpoint");
    if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::map<std::string, std::string> entries;
  const std::size_t n_config = expect_section(is, "config");
  for (std::size_t i = 0; i < n_config; ++i) {
    const std::string line = expect_line(is, "config entries");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint: bad config line '" + line + "'");
    entries[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const ModelConfig cfg = model_config_from_entries(entries);

  const std::size_t n_vocab = expect_section(is, "vocab");
  std::vector<std::string> tokens;
  tokens.reserve(n_vocab);
  for (std::size_t i = 0; i < n_vocab; ++i) tokens.push_back(expect_line(is, "vocab tokens"));

  Checkpoint ck{QaModel::init(cfg, 0), Vocab(std::move(tokens))};
  ParamList params = ck.model.parameters();
  const std::size_t n_tensors = expect_section(is, "tensors");
  if (n_tensors != params.size()) {
    throw DataError("checkpoint: " + std::to_string(n_tensors) + " tensors, model expects " +
                    std::to_string(params.size()));
  }
  for (auto& np : params) {
    std::istringstream hs(expect_line(is, "tensor header"));
    std::string name;
    std::size_t rank = 0;
    if (!(hs >> name >> rank) || name != np.name) {
      throw DataError("checkpoint: expected tensor " + np.name + ", found '" + name + "'");
    }
    Shape shape(rank);
    for (auto& d : shape) {
      if (!(hs >> d)) throw DataError("checkpoint: truncated shape for " + name);
    }
    if (shape != np.param->value.shape) {
      throw DataError("checkpoint: tensor " + name + " has shape " + shape_str(shape) + ", expected " +
                      shape_str(np.param->value.shape));
    }
    std::istringstream vs(expect_line(is, "tensor values"));
    for (auto& v : np.param->value.values) {
      std::string tok;
      if (!(vs >> tok)) throw DataError("checkpoint: truncated values for " + name);
      v = parse_double(name, tok);
    }
    np.param->zero_grad();
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, QaModel& model, const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  write_checkpoint(out, model, vocab);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace qa
