#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "qa/checkpoint.hpp"
#include "qa/errors.hpp"
#include "qa/metrics.hpp"
#include "qa/report.hpp"

namespace qa::cli {

namespace {

struct Options {
  std::string command;
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string vocab;
  std::string checkpoint;
  std::string pred;
  bool quiet = false;
};

struct Context {
  Options opt;
  Config cfg;
  std::ostream& out;
  std::ostream& err;
};

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required flag ") + flag);
  return value;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << content;
  if (!os) throw DataError("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> corpus_of(std::span<const QAExample> examples) {
  std::vector<std::string> corpus;
  for (const auto& ex : examples) {
    corpus.push_back(ex.context);
    corpus.push_back(ex.question);
  }
  return corpus;
}

Vocab vocab_for(const Context& ctx, std::span<const QAExample> examples) {
  if (!ctx.opt.vocab.empty()) return load_vocab(ctx.opt.vocab);
  return build_vocab(corpus_of(examples));
}

std::vector<QAExample> eval_examples(const Context& ctx, const std::vector<QAExample>& fallback) {
  const std::string& path = ctx.cfg.str("eval.data");
  return path.empty() ? fallback : load_dataset(path);
}

int cmd_synth(Context& ctx) {
  const std::string out = require(ctx.opt.out, "--out");
  const SyntheticSpec spec = ctx.cfg.synth();
  const SyntheticData data = make_synthetic(spec);
  std::string text;
  for (const auto& ex : data.train) text += triplet_line(ex) + "\n";
  for (const auto& ex : data.dev) text += triplet_line(ex) + "\n";
  write_file(out, text);
  if (!ctx.opt.vocab.empty()) save_vocab(synthetic_vocab(spec), ctx.opt.vocab);
  if (!ctx.opt.quiet) {
    ctx.err << "synth: " << data.train.size() + data.dev.size() << " examples (" << data.train.size() << " train, "
            << data.dev.size() << " dev) -> " << out << '\n';
  }
  return kOk;
}

int cmd_train(Context& ctx) {
  const std::string data_path = require(ctx.opt.data, "--data");
  const std::filesystem::path out = require(ctx.opt.out, "--out");
  const TrainConfig tcfg = ctx.cfg.train();
  const auto examples = load_dataset(data_path);
  const Vocab vocab = vocab_for(ctx, examples);
  ModelConfig mcfg = ctx.cfg.model();
  mcfg.encoder.vocab_size = vocab.size();
  QaModel model = QaModel::init(mcfg, tcfg.seed);
  const auto features = build_features(examples, vocab, tcfg.max_len, tcfg.overlap);

  EpochCallback log_epoch;
  if (!ctx.opt.quiet) {
    log_epoch = [&ctx](std::size_t epoch, double loss) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "epoch %zu loss %.6f", epoch, loss);
      ctx.err << buf << '\n';
    };
  }
  const TrainResult result = train(model, features, tcfg, log_epoch);

  save_checkpoint(out, model, vocab);
  std::string csv_path = ctx.cfg.str("train.loss_csv");
  if (csv_path.empty()) csv_path = out.string() + ".loss.csv";
  std::ostringstream csv;
  write_loss_csv(csv, result.history);
  write_file(csv_path, csv.str());

  const double last = result.history.empty() ? 0.0 : result.history.back().loss;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "steps=%zu features=%zu final_loss=%.6f", result.steps, features.size(), last);
  ctx.out << buf << '\n';
  return kOk;
}

int cmd_predict(Context& ctx) {
  Checkpoint ck = load_checkpoint(require(ctx.opt.checkpoint, "--checkpoint"));
  const auto examples = load_dataset(require(ctx.opt.data, "--data"));
  const TrainConfig tcfg = ctx.cfg.train();
  const Predictions preds = predict_dataset(ck.model, examples, ck.vocab, ctx.cfg.decode(), tcfg.max_len, tcfg.overlap);
  const std::string json = predictions_json(preds);
  if (ctx.opt.out.empty()) {
    ctx.out << json;
  } else {
    write_file(ctx.opt.out, json);
  }
  return kOk;
}

int cmd_eval(Context& ctx) {
  const auto texts = parse_prediction_texts(read_file(require(ctx.opt.pred, "--pred")));
  const auto examples = load_dataset(require(ctx.opt.data, "--data"));
  const MetricResult m = evaluate(texts, examples);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "f1=%.4f em=%.4f", m.f1, m.exact_match);
  ctx.out << buf << '\n';
  return kOk;
}

// One run per line: <model> <dataset> [key=value ...]. Keys train, eval,
// vocab and checkpoint name files (relative to the spec file); any other key
// overrides the resolved config for that run.
std::vector<RunSpec> parse_run_specs(const Context& ctx, const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&base](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() || base.empty() ? fp : base / fp;
  };
  std::vector<RunSpec> runs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    RunSpec run;
    if (!(ls >> run.model_name) || run.model_name[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (!(ls >> run.dataset_name)) throw ConfigError(where + "expected <model> <dataset> [key=value ...]");
    Config cfg = ctx.cfg;
    std::string kv;
    while (ls >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(where + "expected key=value, got '" + kv + "'");
      const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
      if (key == "train") {
        run.train_data = resolve(value);
      } else if (key == "eval") {
        run.eval_data = resolve(value);
      } else if (key == "vocab") {
        run.vocab = resolve(value);
      } else if (key == "checkpoint") {
        run.checkpoint = resolve(value);
      } else {
        try {
          cfg.set(key, value);
        } catch (const ConfigError& e) {
          throw ConfigError(where + e.what());
        }
      }
    }
    if (run.train_data.empty() && run.eval_data.empty()) throw ConfigError(where + "run needs train= or eval=");
    if (run.train_data.empty() && run.checkpoint.empty()) throw ConfigError(where + "run needs train= or checkpoint=");
    if (run.train_data.empty()) run.train_data = run.eval_data;
    run.model = cfg.model();
    run.train = cfg.train();
    run.decode = cfg.decode();
    runs.push_back(std::move(run));
  }
  return runs;
}

int cmd_bench(Context& ctx) {
  const auto runs = parse_run_specs(ctx, require(ctx.opt.data, "--data"));
  const EvalReport report = benchmark(runs);
  const std::string grid = report.render();
  ctx.out << grid;
  for (const auto& [cell, reason] : report.failures()) ctx.err << "bench: " << cell << " failed: " << reason << '\n';
  if (!ctx.opt.out.empty()) {
    write_file(ctx.opt.out, grid);
    write_file(ctx.opt.out + ".json", report.to_json());
  }
  return report.failures().empty() ? kOk : kData;
}

int cmd_compare(Context& ctx) {
  const auto train_set = load_dataset(require(ctx.opt.data, "--data"));
  const auto eval_set = eval_examples(ctx, train_set);
  const Vocab vocab = vocab_for(ctx, train_set);
  ModelConfig baseline = ctx.cfg.model();
  baseline.use_bilstm = false;
  ModelConfig bilstm = baseline;
  bilstm.use_bilstm = true;
  bilstm.bilstm_cell = ctx.cfg.size("model.bilstm_cell");
  const CompareResult r = compare(baseline, bilstm, ctx.cfg.train(), ctx.cfg.decode(), vocab, train_set, eval_set);
  ctx.out << r.format() << '\n';
  return kOk;
}

int cmd_gradcheck(Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const ModelGradCheck g =
      model_grad_check(ctx.cfg.model(), ctx.cfg.size("gradcheck.vocab_size"), ctx.cfg.size("gradcheck.seq_len"),
                       ctx.cfg.size("gradcheck.pad"), ctx.cfg.u64("seed"), ctx.cfg.real("gradcheck.h"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double tol = ctx.cfg.real("gradcheck.tol");
  char buf[256];
  std::snprintf(buf, sizeof(buf), "max_rel_error=%.3e checked=%zu worst=%s[%zu] analytic=%.9e numeric=%.9e seconds=%.2f",
                g.result.max_rel_error, g.result.checked, g.worst_name.c_str(), g.result.worst_index, g.result.analytic,
                g.result.numeric, secs);
  ctx.out << buf << '\n';
  if (!g.result.passed(tol)) {
    ctx.err << "gradcheck: max relative error above tolerance " << tol << '\n';
    return kNumeric;
  }
  return kOk;
}

int dispatch(Context& ctx) {
  const std::string& c = ctx.opt.command;
  if (c == "synth") return cmd_synth(ctx);
  if (c == "train") return cmd_train(ctx);
  if (c == "predict") return cmd_predict(ctx);
  if (c == "eval") return cmd_eval(ctx);
  if (c == "bench") return cmd_bench(ctx);
  if (c == "compare") return cmd_compare(ctx);
  if (c == "gradcheck") return cmd_gradcheck(ctx);
  throw ConfigError("unknown command " + c);
}

}  // namespace

ModelGradCheck model_grad_check(ModelConfig cfg, std::size_t vocab_size, std::size_t seq_len, std::size_t pad,
                                std::uint64_t seed, double h) {
  if (seq_len < 4 || pad + 4 > seq_len) throw ConfigError("gradcheck: need at least 4 real positions");
  if (vocab_size <= Vocab::special_tokens().size()) throw ConfigError("gradcheck: vocab too small");
  cfg.encoder.vocab_size = vocab_size;
  cfg.encoder.max_positions = std::max(cfg.encoder.max_positions, seq_len);
  QaModel model = QaModel::init(cfg, seed);

  Rng rng(seed + 1);
  const std::size_t real = seq_len - pad;
  const int first_word = static_cast<int>(Vocab::special_tokens().size());
  std::uniform_int_distribution<int> word(first_word, static_cast<int>(vocab_size) - 1);
  Encoding enc;
  const std::size_t q_len = 1;
  for (std::size_t t = 0; t < seq_len; ++t) {
    int id = word(rng);
    if (t == 0) id = 2;
    if (t == q_len + 1 || t + 1 == real) id = 3;
    if (t >= real) id = 0;
    enc.ids.push_back(id);
    enc.segment_ids.push_back(t > q_len + 1 && t < real ? 1 : 0);
    enc.pad_mask.push_back(t < real ? 1 : 0);
    enc.offsets.push_back({});
  }
  enc.context_begin = q_len + 2;
  enc.context_len = real - q_len - 3;
  std::uniform_int_distribution<std::size_t> pos(enc.context_begin, enc.context_begin + enc.context_len - 1);
  const std::size_t gs = pos(rng), ge = pos(rng);

  ParamList named = model.parameters();
  std::vector<Parameter*> params = raw_params(named);
  ModelGradCheck out;
  out.result = grad_check(
      [&](Tape& tape) {
        SpanLogits l = forward(tape, model, enc);
        return qa_loss(l.start, l.end, gs, ge);
      },
      params, h);
  out.worst_name = named.at(out.result.worst_param).name;
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Extractive QA span models: synthesize, train, predict, evaluate, benchmark"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  std::uint64_t seed = 0;
  app.add_option("--config", opt.config, "flat key=value config file");
  app.add_option("--set", opt.sets, "override one config key (k=v), repeatable");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--out", opt.out, "output path");
  app.add_option("--data", opt.data, "dataset (triplet lines, or SQuAD .json); run specs for bench");
  app.add_option("--vocab", opt.vocab, "vocabulary file");
  app.add_option("--checkpoint", opt.checkpoint, "model checkpoint");
  app.add_option("--pred", opt.pred, "predictions JSON");
  app.add_flag("--quiet", opt.quiet, "suppress progress output");
  for (const char* name : {"synth", "train", "predict", "eval", "bench", "compare", "gradcheck"}) {
    app.add_subcommand(name)->callback([&opt, name] { opt.command = name; });
  }
  static const std::map<std::string, std::string> kHelp = {
      {"synth", "write the synthetic marker dataset as triplet lines"},
      {"train", "train a model and write a checkpoint plus loss CSV"},
      {"predict", "write predictions JSON for a dataset"},
      {"eval", "score predictions against a dataset"},
      {"bench", "train/evaluate every run in a spec file and render the report grid"},
      {"compare", "train baseline and BiLSTM models and print the F1 delta"},
      {"gradcheck", "finite-difference check over every model parameter"},
  };
  for (auto* sub : app.get_subcommands({})) sub->description(kHelp.at(sub->get_name()));

  std::vector<std::string> storage{"qa"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  if (seed_opt->count() > 0) opt.seed = seed;

  try {
    Context ctx{opt, Config::defaults(opt.command), out, err};
    if (!opt.config.empty()) ctx.cfg.load_file(opt.config);
    if (opt.seed) ctx.cfg.set("seed", std::to_string(*opt.seed));
    for (const auto& s : opt.sets) ctx.cfg.set_assignment(s);
    err << "command " << opt.command << '\n';
    ctx.cfg.log(err);
    return dispatch(ctx);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace qa::cli
