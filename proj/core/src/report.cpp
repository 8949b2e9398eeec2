#include "qa/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "qa/checkpoint.hpp"
#include "qa/errors.hpp"

namespace qa {

const std::vector<std::string>& EvalReport::reference_columns() {
  static const std::vector<std::string> kColumns = {"NewsQA", "SQuAD", "QuAC", "CovidQA"};
  return kColumns;
}

void EvalReport::add_model(const std::string& model) {
  if (std::find(models_.begin(), models_.end(), model) == models_.end()) models_.push_back(model);
}

void EvalReport::add_dataset(const std::string& dataset) {
  const auto& ref = reference_columns();
  if (std::find(ref.begin(), ref.end(), dataset) != ref.end()) return;
  if (std::find(extra_datasets_.begin(), extra_datasets_.end(), dataset) == extra_datasets_.end()) {
    extra_datasets_.push_back(dataset);
  }
}

void EvalReport::set(const std::string& model, const std::string& dataset, const CellSummary& cell) {
  add_model(model);
  add_dataset(dataset);
  cells_[{model, dataset}] = cell;
  failures_.erase(model + "/" + dataset);
}

void EvalReport::mark_absent(const std::string& model, const std::string& dataset, const std::string& reason) {
  add_model(model);
  add_dataset(dataset);
  cells_.erase({model, dataset});
  failures_[model + "/" + dataset] = reason;
}

std::optional<CellSummary> EvalReport::cell(const std::string& model, const std::string& dataset) const {
  auto it = cells_.find({model, dataset});
  if (it == cells_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> EvalReport::datasets() const {
  std::vector<std::string> out = reference_columns();
  out.insert(out.end(), extra_datasets_.begin(), extra_datasets_.end());
  return out;
}

std::string EvalReport::render() const {
  const auto cols = datasets();
  std::vector<std::vector<std::string>> grid;
  for (const auto& m : models_) {
    std::vector<std::string> row{m};
    for (const auto& d : cols) {
      if (auto c = cell(m, d)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", c->f1 * 100.0);
        row.emplace_back(buf);
      } else {
        row.emplace_back("-");
      }
    }
    grid.push_back(std::move(row));
  }
  std::vector<std::size_t> width(cols.size() + 1);
  width[0] = std::string("Model").size();
  for (std::size_t c = 0; c < cols.size(); ++c) width[c + 1] = cols[c].size();
  for (const auto& row : grid)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        os << row[c] << std::string(width[c] - row[c].size(), ' ');
      } else {
        os << " | " << std::string(width[c] - row[c].size(), ' ') << row[c];
      }
    }
    os << '\n';
  };
  std::vector<std::string> header{"Model"};
  header.insert(header.end(), cols.begin(), cols.end());
  emit(header);
  for (std::size_t c = 0; c < width.size(); ++c) {
    if (c) os << "-+-";
    os << std::string(width[c], '-');
  }
  os << '\n';
  for (const auto& row : grid) emit(row);
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& m : models_) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (const auto& d : datasets()) {
      if (auto c = cell(m, d)) {
        row[d] = {{"f1", c->f1}, {"em", c->em}, {"n", c->n}};
      } else {
        row[d] = nullptr;
      }
    }
    doc[m] = std::move(row);
  }
  return doc.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& json_text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("report: malformed JSON: ") + e.what());
  }
  EvalReport r;
  for (auto mit = doc.begin(); mit != doc.end(); ++mit) {
    r.add_model(mit.key());
    for (auto dit = mit.value().begin(); dit != mit.value().end(); ++dit) {
      r.add_dataset(dit.key());
      const auto& c = dit.value();
      if (c.is_null()) continue;
      r.set(mit.key(), dit.key(), {c.at("f1").get<double>(), c.value("em", 0.0), c.value("n", std::size_t{0})});
    }
  }
  return r;
}

std::vector<QAExample> load_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".json") return load_squad_json(path);
  return load_triplets(path).examples;
}

namespace {

std::vector<std::string> corpus_of(std::span<const QAExample> examples) {
  std::vector<std::string> corpus;
  for (const auto& ex : examples) {
    corpus.push_back(ex.context);
    corpus.push_back(ex.question);
  }
  return corpus;
}

MetricResult evaluate_model(QaModel& model, const Vocab& vocab, const TrainConfig& train, const DecodeConfig& decode,
                            std::span<const QAExample> eval_set) {
  const Predictions preds = predict_dataset(model, eval_set, vocab, decode, train.max_len, train.overlap);
  std::map<std::string, std::string> texts;
  for (const auto& [id, p] : preds) texts[id] = p.is_null ? std::string() : p.text;
  return evaluate(texts, eval_set);
}

}  // namespace

RunOutcome train_and_evaluate(ModelConfig model_cfg, const TrainConfig& train_cfg, const DecodeConfig& decode,
                              const Vocab& vocab, std::span<const QAExample> train_set,
                              std::span<const QAExample> eval_set) {
  model_cfg.encoder.vocab_size = vocab.size();
  QaModel model = QaModel::init(model_cfg, train_cfg.seed);
  const auto features = build_features(train_set, vocab, train_cfg.max_len, train_cfg.overlap);
  RunOutcome out;
  out.training = train(model, features, train_cfg);
  out.metrics = evaluate_model(model, vocab, train_cfg, decode, eval_set);
  return out;
}

EvalReport benchmark(std::span<const RunSpec> runs) {
  EvalReport report;
  for (const auto& run : runs) {
    report.add_model(run.model_name);
    report.add_dataset(run.dataset_name);
  }
  for (const auto& run : runs) {
    try {
      const auto eval_set = load_dataset(run.eval_data.empty() ? run.train_data : run.eval_data);
      MetricResult metrics;
      if (!run.checkpoint.empty()) {
        Checkpoint ck = load_checkpoint(run.checkpoint);
        metrics = evaluate_model(ck.model, ck.vocab, run.train, run.decode, eval_set);
      } else {
        const auto train_set = load_dataset(run.train_data);
        const Vocab vocab = run.vocab.empty() ? build_vocab(corpus_of(train_set)) : load_vocab(run.vocab);
        metrics = train_and_evaluate(run.model, run.train, run.decode, vocab, train_set, eval_set).metrics;
      }
      report.set(run.model_name, run.dataset_name, {metrics.f1, metrics.exact_match, metrics.n_examples});
    } catch (const std::exception& e) {
      report.mark_absent(run.model_name, run.dataset_name, e.what());
    }
  }
  return report;
}

std::string CompareResult::format() const {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "baseline=%.3f bilstm=%.3f delta=%+.1f pp", baseline_f1, bilstm_f1, delta_pp());
  return buf;
}

CompareResult compare(const ModelConfig& baseline, const ModelConfig& bilstm, const TrainConfig& train,
                      const DecodeConfig& decode, const Vocab& vocab, std::span<const QAExample> train_set,
                      std::span<const QAExample> eval_set) {
  if (!(baseline.encoder == bilstm.encoder)) {
    throw ConfigError("compare: baseline and BiLSTM configs must share the encoder settings");
  }
  CompareResult r;
  r.baseline_f1 = train_and_evaluate(baseline, train, decode, vocab, train_set, eval_set).metrics.f1;
  r.bilstm_f1 = train_and_evaluate(bilstm, train, decode, vocab, train_set, eval_set).metrics.f1;
  return r;
}

}  // namespace qa
