// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "desk.hpp"
#include "qa/checkpoint.hpp"
#include "qa/encoder.hpp"
#include "qa/metrics.hpp"
#include "qa/recurrent.hpp"
#include "qa/report.hpp"
#include "qa/text.hpp"
#include "span_fixtures.hpp"
#include "support.hpp"
#include "temp_dir.hpp"

using namespace qa;
using namespace qa::testing;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = qa::cli::run(args, o, e);
  if (out) *out = o.str();
  return code;
}

void perturb(QaModel& m, std::mt19937_64& g, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& np : m.parameters())
    for (double& v : np.param->value.values) v += u(g);
}

Encoding random_encoding(std::mt19937_64& g, std::size_t n, std::size_t real, std::size_t vocab) {
  Encoding e;
  const std::size_t q = 1;
  for (std::size_t t = 0; t < n; ++t) {
    int id = int(Vocab::special_tokens().size() + g() % (vocab - Vocab::special_tokens().size()));
    if (t == 0) id = Vocab::kCls;
    if (t == q + 1 || t + 1 == real) id = Vocab::kSep;
    if (t >= real) id = Vocab::kPad;
    e.ids.push_back(id);
    e.segment_ids.push_back(t > q + 1 && t < real ? 1 : 0);
    e.pad_mask.push_back(t < real ? 1 : 0);
    e.offsets.push_back({});
  }
  e.context_begin = q + 2;
  e.context_len = real - q - 3;
  return e;
}

ModelConfig small_model(bool bilstm) {
  ModelConfig m;
  m.encoder.layers = 2;
  m.encoder.hidden = 8;
  m.encoder.heads = 2;
  m.encoder.ffn = 16;
  m.encoder.max_positions = 16;
  m.encoder.vocab_size = 20;
  m.use_bilstm = bilstm;
  return m;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  ModelConfig cfg;
  cfg.encoder.layers = 2;
  cfg.encoder.hidden = 16;
  cfg.encoder.heads = 2;
  cfg.encoder.ffn = 32;
  cfg.encoder.max_positions = 8;
  cfg.use_bilstm = true;
  const auto g = qa::cli::model_grad_check(cfg, 20, 8, 2, 0, 1e-4);
  const double secs = seconds_since(t0);
  return {g.result.max_rel_error <= 1e-4 && secs < 60.0,
          fmt("max_rel_error=%.3e over %zu params, %.1f s", g.result.max_rel_error, g.result.checked, secs)};
}

Outcome decode_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(2024);
  std::size_t agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = random_decode_instance(g, 24);
    DecodeConfig cfg;
    cfg.max_answer_len = 1 + g() % 8;
    cfg.null_threshold = -std::numeric_limits<double>::infinity();
    const SpanPrediction p = decode_best_span(d.start, d.end, d.enc, cfg, d.context);
    const auto want = brute_force_span(d, cfg.max_answer_len);
    agree += p.start == want.i && p.end == want.j && p.score == want.score;
  }
  const double secs = seconds_since(t0);
  return {agree == 1000 && secs < 5.0, fmt("%zu/1000 agree, %.2f s", agree, secs)};
}

Outcome metric_oracle() {
  // P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R) evaluated by hand for (2,1,1).
  const double p = 2.0 / 3.0, r = 2.0 / 3.0, want = 2 * p * r / (p + r);
  const OverlapCounts c = overlap_counts("cat sat down", "big cat sat");
  const std::vector<std::string> gold{"big cat sat"};
  const double f = token_f1("cat sat down", gold);
  const double id = token_f1("big cat sat", gold);
  const double dis = token_f1("dog ran off", gold);
  const bool counts = c.true_positive == 2 && c.false_positive == 1 && c.false_negative == 1;
  const bool ok = counts && std::abs(f - want) <= 1e-12 && std::abs(f - 2.0 / 3.0) <= 1e-12 &&
                  std::abs(id - 1.0) <= 1e-12 && std::abs(dis) <= 1e-12;
  const std::vector<std::string> with_article{"the cat sat"};
  return {ok, fmt("TP=%zu FP=%zu FN=%zu F1=%.15f identity=%.1f disjoint=%.1f (\"the cat sat\" gold scores %.1f: "
                  "articles are dropped)",
                  c.true_positive, c.false_positive, c.false_negative, f, id, dis,
                  token_f1("cat sat down", with_article))};
}

Outcome probability_normalization() {
  std::mt19937_64 g(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    QaModel m = QaModel::init(small_model(trial % 2 == 1), trial);
    perturb(m, g, 2.0);
    const std::size_t n = 6 + g() % 11, real = 5 + g() % (n - 4);
    const Encoding e = random_encoding(g, n, real, 20);
    Tape t;
    const SpanLogits l = forward(t, m, e);
    const Distributions d = distributions(l.start.value().values, l.end.value().values, e.pad_mask);
    double s = 0.0, en = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += d.start[i];
      en += d.end[i];
    }
    worst = std::max({worst, std::abs(s - 1.0), std::abs(en - 1.0)});
  }
  return {worst <= 1e-9, fmt("max |sum - 1| = %.2e over 100 models", worst)};
}

MetricResult learn(const ModelConfig& model, std::size_t epochs) {
  const auto examples = all_synthetic();
  const Vocab v = synthetic_vocab(SyntheticSpec{});
  return train_and_evaluate(model, desk_train(epochs), DecodeConfig{}, v, examples, examples).metrics;
}

Outcome end_to_end_learning() {
  const auto t0 = Clock::now();
  const MetricResult base = learn(desk_model(), 40);
  const double base_secs = seconds_since(t0);

  TempDir dir;
  cli({"synth", "--seed", "7", "--out", dir.file("synth.jsonl"), "--vocab", dir.file("vocab.txt")});
  std::string line;
  const int code = cli({"compare", "--data", dir.file("synth.jsonl"), "--vocab", dir.file("vocab.txt"), "--set",
                        "model.max_positions=32", "--set", "train.max_len=32", "--set", "train.overlap=8", "--set",
                        "train.lr=1e-3", "--set", "train.epochs=40", "--quiet"},
                       &line);
  const double secs = seconds_since(t0);
  double b = -1, l = -1, delta = 0;
  const bool parsed = std::sscanf(line.c_str(), "baseline=%lf bilstm=%lf delta=%lf pp", &b, &l, &delta) == 3;
  const bool signed_delta = line.find("delta=+") != std::string::npos || line.find("delta=-") != std::string::npos;
  if (!line.empty() && line.back() == '\n') line.pop_back();
  const bool ok = base.exact_match >= 0.95 && code == 0 && parsed && signed_delta && l >= 0.0 && l <= 1.0 && secs < 300.0;
  return {ok, fmt("baseline EM=%.3f after 40 epochs (%.1f s); compare: \"%s\"; total %.1f s", base.exact_match,
                  base_secs, line.c_str(), secs)};
}

Outcome albert_sharing() {
  ModelConfig four = desk_model(false, true), one = desk_model(false, true);
  four.encoder.vocab_size = one.encoder.vocab_size = 64;
  one.encoder.layers = 1;
  four.encoder.layers = 4;
  const std::size_t p4 = param_count(four.encoder), p1 = param_count(one.encoder);
  const auto t0 = Clock::now();
  const MetricResult shared = learn(desk_model(false, true), 40);
  const double secs = seconds_since(t0);
  return {p4 == p1 && shared.exact_match >= 0.80,
          fmt("param_count L4=%zu L1=%zu; shared EM=%.3f (%.1f s)", p4, p1, shared.exact_match, secs)};
}

Outcome padding_and_direction() {
  std::mt19937_64 g(77);
  std::size_t bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // Full model (encoder + BiLSTM): padded ids must not reach real rows.
    QaModel m = QaModel::init(small_model(true), trial);
    perturb(m, g, 1.0);
    const std::size_t n = 6 + g() % 11, real = 5 + g() % (n - 4);
    Encoding e = random_encoding(g, n, real, 20);
    Tape t;
    const Tensor a = token_representations(t, m, e).value();
    for (std::size_t k = real; k < n; ++k) {
      e.ids[k] = int(g() % 20);
      e.segment_ids[k] = int(g() % 2);
    }
    const Tensor b = token_representations(t, m, e).value();
    const std::size_t h = m.config.encoder.hidden;
    for (std::size_t i = 0; i < real * h; ++i) bad += a.values[i] != b.values[i];

    // Directional independence on the BiLSTM alone.
    Rng rng(trial);
    BiLstmLayer l = BiLstmLayer::init(4, 3, 4, rng);
    ParamList ps;
    l.collect(ps);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& np : ps)
      for (double& v : np.param->value.values) v = u(g);
    std::vector<int> mask(n, 0);
    for (std::size_t i = 0; i < real; ++i) mask[i] = 1;
    const Tensor x = random_tensor({n, 4}, g);
    const BiLstmOutput base = bilstm(t, t.constant(x), mask, l);
    const std::size_t pos = g() % real;
    Tensor xp = x;
    for (std::size_t c = 0; c < 4; ++c) xp(pos, c) += 0.5;
    const BiLstmOutput pert = bilstm(t, t.constant(xp), mask, l);
    // pos = t+1 for every t < pos leaves A_fwd[t]; pos = t-1 for every t > pos leaves A_bwd[t].
    for (std::size_t r = 0; r < pos; ++r)
      for (std::size_t c = 0; c < 3; ++c) bad += pert.forward.value()(r, c) != base.forward.value()(r, c);
    for (std::size_t r = pos + 1; r < real; ++r)
      for (std::size_t c = 0; c < 3; ++c) bad += pert.backward.value()(r, c) != base.backward.value()(r, c);
  }
  return {bad == 0, fmt("%zu mismatching entries over 100 cases", bad)};
}

Outcome data_round_trip() {
  const auto examples = load_squad_json(QA_FIXTURE_DIR "/squad_50.json");
  std::vector<std::string> corpus;
  for (const auto& ex : examples) {
    corpus.push_back(ex.context);
    corpus.push_back(ex.question);
  }
  const Vocab v = build_vocab(corpus);
  std::size_t labeled = 0, mismatched = 0, impossible = 0, impossible_bad = 0;
  for (const auto& ex : examples) {
    for (const auto& f : build_features(ex, v, 64, 16)) {
      if (ex.unanswerable) {
        ++impossible;
        impossible_bad += f.start_pos != 0 || f.end_pos != 0;
        continue;
      }
      if (!f.has_answer()) continue;
      ++labeled;
      const std::string got = text::lowercase(decode_span(f.encoding, f.start_pos, f.end_pos, ex.context));
      bool hit = false;
      for (const auto& a : ex.answers) hit |= got == text::lowercase(a.text);
      mismatched += !hit;
    }
  }
  return {examples.size() == 50 && labeled > 0 && mismatched == 0 && impossible > 0 && impossible_bad == 0,
          fmt("%zu examples, %zu labeled features all decode to gold (%zu off), %zu impossible features at CLS (%zu off)",
              examples.size(), labeled, mismatched, impossible, impossible_bad)};
}

Outcome determinism() {
  TempDir dir;
  cli({"synth", "--out", dir.file("d.jsonl"), "--vocab", dir.file("v.txt")});
  auto train_to = [&](const std::string& name) {
    return cli({"train", "--data", dir.file("d.jsonl"), "--vocab", dir.file("v.txt"), "--out", dir.file(name),
                "--seed", "3", "--set", "model.max_positions=32", "--set", "train.max_len=32", "--set",
                "train.overlap=8", "--set", "train.lr=1e-3", "--set", "train.epochs=3", "--quiet"});
  };
  const int a = train_to("a.ckpt"), b = train_to("b.ckpt");
  const bool same_ckpt = slurp(dir.file("a.ckpt")) == slurp(dir.file("b.ckpt"));
  const bool same_csv = slurp(dir.file("a.ckpt.loss.csv")) == slurp(dir.file("b.ckpt.loss.csv"));
  return {a == 0 && b == 0 && same_ckpt && same_csv,
          fmt("checkpoints %s, loss CSVs %s", same_ckpt ? "identical" : "differ", same_csv ? "identical" : "differ")};
}

Outcome report_format() {
  const std::string fixture = slurp(QA_FIXTURE_DIR "/table1.json");
  const EvalReport r = EvalReport::from_json(fixture);
  const std::string grid = r.render();
  std::size_t cells = 0, lost = 0;
  for (const auto& m : r.models())
    for (const auto& d : EvalReport::reference_columns()) {
      ++cells;
      const auto c = r.cell(m, d);
      if (!c) {
        ++lost;
        continue;
      }
      // Every row must carry the value at one decimal.
      const auto row = grid.find("\n" + m + " ");
      const auto end = grid.find('\n', row + 1);
      lost += row == std::string::npos || grid.substr(row, end - row).find(fmt("%.1f", c->f1 * 100.0)) == std::string::npos;
    }
  const bool layout = grid.rfind("Model       | NewsQA | SQuAD | QuAC | CovidQA\n", 0) == 0 &&
                      grid.find("\nBERT        |   52.1 |  64.7 | 28.6 |    44.8\n") != std::string::npos &&
                      grid.find("\nRoBERTa     |   57.0 |  68.2 | 31.3 |    44.5\n") != std::string::npos;

  // The bench command puts its columns in the same order, whatever order the runs list them.
  TempDir dir;
  cli({"synth", "--out", dir.file("d.jsonl"), "--set", "synth.examples=8"});
  dir.write("runs.txt",
            "tiny CovidQA train=d.jsonl\n"
            "tiny SQuAD train=d.jsonl\n");
  std::string bench;
  cli({"bench", "--data", dir.file("runs.txt"), "--set", "model.layers=1", "--set", "model.hidden=8", "--set",
       "model.ffn=16", "--set", "model.max_positions=32", "--set", "train.max_len=32", "--set", "train.overlap=8",
       "--set", "train.epochs=1", "--quiet"},
      &bench);
  const bool bench_order = bench.rfind("Model | NewsQA | SQuAD | QuAC | CovidQA\n", 0) == 0;
  return {cells == 28 && lost == 0 && layout && bench_order,
          fmt("%zu/%zu Table I cells rendered, column order %s, bench header %s", cells - lost, cells,
              layout ? "ok" : "wrong", bench_order ? "ok" : "wrong")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"span-decode oracle", decode_oracle},
      {"metric oracle", metric_oracle},
      {"probability normalization", probability_normalization},
      {"end-to-end learning", end_to_end_learning},
      {"ALBERT sharing", albert_sharing},
      {"padding/bidirectionality", padding_and_direction},
      {"data round-trip", data_round_trip},
      {"determinism", determinism},
      {"report format", report_format},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
