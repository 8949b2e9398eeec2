#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "qa/data.hpp"
#include "qa/metrics.hpp"
#include "qa/report.hpp"
#include "temp_dir.hpp"

using qa::testing::slurp;
using qa::testing::TempDir;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result qa_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = qa::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// A model small enough that a CLI train call takes a fraction of a second.
std::vector<std::string> tiny(std::vector<std::string> args) {
  for (const char* kv : {"model.layers=1", "model.hidden=8", "model.ffn=16", "model.max_positions=32", "train.max_len=32",
                         "train.overlap=8", "train.epochs=2", "train.lr=1e-3"}) {
    args.push_back("--set");
    args.push_back(kv);
  }
  return args;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth twice is byte-identical") {
  TempDir dir;
  const auto a = qa_run({"synth", "--seed", "7", "--out", dir.file("a.jsonl")});
  const auto b = qa_run({"synth", "--seed", "7", "--out", dir.file("b.jsonl"), "--vocab", dir.file("v.txt")});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(dir.file("a.jsonl")) == slurp(dir.file("b.jsonl")));
  CHECK(qa::load_triplets(dir.file("a.jsonl")).examples.size() == 64);
  CHECK(qa::load_vocab(dir.file("v.txt")).size() == 64);
  qa_run({"synth", "--seed", "8", "--out", dir.file("c.jsonl")});
  CHECK(slurp(dir.file("a.jsonl")) != slurp(dir.file("c.jsonl")));
}

TEST_CASE("resolved config is logged, overrides included") {
  TempDir dir;
  qa_run({"synth", "--out", dir.file("d.jsonl")});
  const std::string cfg = dir.write("c.cfg", "# desk\nmodel.layers=1\ntrain.lr=0.5\n");
  auto args = tiny({"train", "--config", cfg, "--data", dir.file("d.jsonl"), "--out", dir.file("m.ckpt"), "--quiet"});
  args.insert(args.end(), {"--set", "train.lr=5e-5"});
  const auto r = qa_run(args);
  REQUIRE(r.code == 0);
  CHECK(r.err.find("command train\n") == 0);
  CHECK(r.err.find("config train.lr=5e-5\n") != std::string::npos);
  CHECK(r.err.find("config model.layers=1\n") != std::string::npos);
  CHECK(r.out.find("steps=16 features=64") == 0);
  CHECK(slurp(dir.file("m.ckpt.loss.csv")).rfind("step,epoch,loss\n", 0) == 0);
}

TEST_CASE("exit codes") {
  TempDir dir;
  CHECK(qa_run({}).code == 1);
  CHECK(qa_run({"fly"}).code == 1);
  CHECK(qa_run({"--help"}).code == 0);
  CHECK(qa_run({"synth", "--out", dir.file("d.jsonl"), "--set", "model.colour=red"}).code == 1);
  CHECK(qa_run({"synth", "--out", dir.file("d.jsonl"), "--set", "train.lr"}).code == 1);
  CHECK(qa_run({"synth"}).code == 1);
  const auto missing = qa_run({"train", "--data", dir.file("nope.jsonl"), "--out", dir.file("m.ckpt")});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.jsonl") != std::string::npos);
  CHECK(qa_run({"eval", "--pred", dir.write("p.json", "{"), "--data", dir.file("nope.jsonl")}).code == 2);
}

TEST_CASE("eval on perfect predictions") {
  TempDir dir;
  qa_run({"synth", "--out", dir.file("d.jsonl")});
  const auto examples = qa::load_triplets(dir.file("d.jsonl")).examples;
  std::string json = "{";
  for (const auto& ex : examples) {
    if (json.size() > 1) json += ",";
    json += "\"" + ex.id + "\":\"" + ex.answers.at(0).text + "\"";
  }
  json += "}";
  const auto r = qa_run({"eval", "--pred", dir.write("p.json", json), "--data", dir.file("d.jsonl")});
  CHECK(r.code == 0);
  CHECK(r.out == "f1=1.0000 em=1.0000\n");
}

TEST_CASE("predict | eval equals the bench cell") {
  TempDir dir;
  qa_run({"synth", "--out", dir.file("d.jsonl"), "--vocab", dir.file("v.txt")});
  REQUIRE(qa_run(tiny({"train", "--data", dir.file("d.jsonl"), "--vocab", dir.file("v.txt"), "--out",
                       dir.file("m.ckpt"), "--quiet"}))
              .code == 0);
  const auto p = qa_run(tiny({"predict", "--checkpoint", dir.file("m.ckpt"), "--data", dir.file("d.jsonl"), "--out",
                              dir.file("p.json")}));
  REQUIRE(p.code == 0);
  const auto e = qa_run({"eval", "--pred", dir.file("p.json"), "--data", dir.file("d.jsonl")});
  REQUIRE(e.code == 0);

  // Stdout form of predict matches the file form.
  const auto p2 = qa_run(tiny({"predict", "--checkpoint", dir.file("m.ckpt"), "--data", dir.file("d.jsonl")}));
  CHECK(p2.out == slurp(dir.file("p.json")));

  dir.write("runs.txt",
            "# model dataset files...\n"
            "tiny Synthetic checkpoint=m.ckpt eval=d.jsonl\n"
            "trained Synthetic train=d.jsonl vocab=v.txt\n");
  const auto b = qa_run(tiny({"bench", "--data", dir.file("runs.txt"), "--out", dir.file("grid.txt")}));
  REQUIRE(b.code == 0);
  CHECK(b.out == slurp(dir.file("grid.txt")));
  const auto report = qa::EvalReport::from_json(slurp(dir.file("grid.txt.json")));
  char line[64];
  const auto ckpt_cell = report.cell("tiny", "Synthetic");
  REQUIRE(ckpt_cell);
  std::snprintf(line, sizeof(line), "f1=%.4f em=%.4f\n", ckpt_cell->f1, ckpt_cell->em);
  CHECK(e.out == line);

  // The trained cell reproduces the separately trained checkpoint.
  const auto trained = report.cell("trained", "Synthetic");
  REQUIRE(trained);
  CHECK(trained->f1 == ckpt_cell->f1);
  CHECK(trained->em == ckpt_cell->em);
}

TEST_CASE("bench marks failing cells and exits nonzero") {
  TempDir dir;
  qa_run({"synth", "--out", dir.file("d.jsonl")});
  dir.write("runs.txt", "m SQuAD train=d.jsonl train.epochs=1\nm NewsQA train=missing.jsonl\n");
  const auto b = qa_run(tiny({"bench", "--data", dir.file("runs.txt")}));
  CHECK(b.code == 2);
  CHECK(b.err.find("m/NewsQA failed") != std::string::npos);
  CHECK(b.out.rfind("Model | NewsQA | SQuAD | QuAC | CovidQA\n", 0) == 0);
  CHECK(b.out.find("m     |      - |") != std::string::npos);

  dir.write("bad.txt", "m SQuAD train=d.jsonl model.nope=1\n");
  CHECK(qa_run({"bench", "--data", dir.file("bad.txt")}).code == 1);
}

TEST_CASE("compare and gradcheck") {
  TempDir dir;
  qa_run({"synth", "--out", dir.file("d.jsonl"), "--set", "synth.examples=8"});
  const auto c = qa_run(tiny({"compare", "--data", dir.file("d.jsonl"), "--set", "train.epochs=1"}));
  REQUIRE(c.code == 0);
  CHECK(c.out.rfind("baseline=", 0) == 0);
  CHECK(c.out.find(" pp\n") != std::string::npos);

  const auto g = qa_run({"gradcheck", "--set", "model.layers=1", "--set", "model.bilstm=false"});
  CHECK(g.code == 0);
  CHECK(g.out.rfind("max_rel_error=", 0) == 0);
  const auto strict = qa_run({"gradcheck", "--set", "model.layers=1", "--set", "gradcheck.tol=1e-300"});
  CHECK(strict.code == 3);
}

}
