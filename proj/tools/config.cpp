#include "config.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "qa/errors.hpp"

namespace qa::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Config Config::defaults(std::string_view command) {
  Config c;
  c.values_ = {
      {"seed", "0"},
      {"model.layers", "2"},
      {"model.hidden", "64"},
      {"model.heads", "2"},
      {"model.ffn", "128"},
      {"model.max_positions", "512"},
      {"model.share_layers", "false"},
      {"model.dropout", "0"},
      {"model.bilstm", "false"},
      {"model.bilstm_cell", "0"},
      {"model.bilstm_activation", "tanh"},
      {"train.lr", "5e-05"},
      {"train.epochs", "3"},
      {"train.batch_size", "8"},
      {"train.max_len", "512"},
      {"train.overlap", "128"},
      {"train.shuffle", "true"},
      {"train.loss_csv", ""},
      {"decode.max_answer_len", "30"},
      {"decode.null_threshold", "0"},
      {"decode.n_best", "5"},
      {"synth.vocab_size", "64"},
      {"synth.context_len", "24"},
      {"synth.examples", "64"},
      {"synth.max_answer_tokens", "4"},
      {"eval.data", ""},
      {"gradcheck.seq_len", "8"},
      {"gradcheck.pad", "2"},
      {"gradcheck.vocab_size", "20"},
      {"gradcheck.h", "1e-4"},
      {"gradcheck.tol", "1e-4"},
  };
  if (command == "synth") c.values_["seed"] = "7";
  if (command == "gradcheck") {
    c.values_["model.hidden"] = "16";
    c.values_["model.ffn"] = "32";
    c.values_["model.max_positions"] = "8";
    c.values_["model.bilstm"] = "true";
  }
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void Config::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

void Config::load_text(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      set_assignment(t);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

const std::string& Config::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::uint64_t Config::u64(const std::string& key) const {
  const std::string& s = str(key);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::size_t Config::size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

double Config::real(const std::string& key) const {
  const std::string& s = str(key);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(key + ": expected a number, got '" + s + "'");
  return v;
}

bool Config::flag(const std::string& key) const {
  const std::string& s = str(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

ModelConfig Config::model() const {
  ModelConfig m;
  m.encoder.layers = size("model.layers");
  m.encoder.hidden = size("model.hidden");
  m.encoder.heads = size("model.heads");
  m.encoder.ffn = size("model.ffn");
  m.encoder.max_positions = size("model.max_positions");
  m.encoder.share_layers = flag("model.share_layers");
  m.encoder.dropout = real("model.dropout");
  m.use_bilstm = flag("model.bilstm");
  m.bilstm_cell = size("model.bilstm_cell");
  const std::string& act = str("model.bilstm_activation");
  if (act == "tanh") {
    m.bilstm_activation = OutputActivation::kTanh;
  } else if (act == "identity") {
    m.bilstm_activation = OutputActivation::kIdentity;
  } else {
    throw ConfigError("model.bilstm_activation: expected tanh or identity, got '" + act + "'");
  }
  return m;
}

TrainConfig Config::train() const {
  TrainConfig t;
  t.lr = real("train.lr");
  t.epochs = size("train.epochs");
  t.batch_size = size("train.batch_size");
  t.max_len = size("train.max_len");
  t.overlap = size("train.overlap");
  t.shuffle = flag("train.shuffle");
  t.seed = u64("seed");
  t.validate();
  return t;
}

DecodeConfig Config::decode() const {
  DecodeConfig d;
  d.max_answer_len = size("decode.max_answer_len");
  d.null_threshold = real("decode.null_threshold");
  d.n_best = size("decode.n_best");
  return d;
}

SyntheticSpec Config::synth() const {
  SyntheticSpec s;
  s.vocab_size = size("synth.vocab_size");
  s.context_len = size("synth.context_len");
  s.examples = size("synth.examples");
  s.max_answer_tokens = size("synth.max_answer_tokens");
  s.seed = u64("seed");
  return s;
}

void Config::log(std::ostream& os) const {
  for (const auto& [k, v] : values_) os << "config " << k << '=' << v << '\n';
}

}  // namespace qa::cli
