#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "kgalign/metrics.hpp"
#include "kgalign/pipeline.hpp"
#include "support.hpp"

using namespace kgalign;
namespace fs = std::filesystem;

namespace {

PipelineConfig small(const fs::path& out) {
  PipelineConfig c;
  c.n_entities = 300;
  c.blocks = 2;
  c.budget = 40;
  c.train.dim = 16;
  c.train.proxies = 8;
  c.train.n_cross = 32;
  c.train.epochs = 2;
  c.seed = 17;
  c.out = out;
  return c;
}

/// Metrics lines with the timing line removed.
std::string stable_metrics(const fs::path& file) {
  std::istringstream in(testing::read_text(file));
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("runtime_seconds=", 0) == 0) continue;
    out += line + '\n';
  }
  return out;
}

int run_cli(const std::string& args, const fs::path& log) {
  const char* exe = std::getenv("KGALIGN_CLI");
  REQUIRE_MESSAGE(exe != nullptr, "KGALIGN_CLI must point at the command-line tool");
  const std::string cmd = std::string(exe) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config defaults") {
  const PipelineConfig c;
  CHECK(c.eta == 0.001);
  CHECK(c.lambda == 0.01);
  CHECK(c.floor == 0.49);
  CHECK(c.search.k == 5);
  CHECK(c.train.alpha == 15.0);
  CHECK(c.train.beta == 0.7);
  CHECK(c.split.train == 0.3);
  CHECK(c.split.valid == 0.1);
  const auto entries = c.entries();
  REQUIRE(entries.size() == PipelineConfig::keys().size());
  for (std::size_t i = 0; i < entries.size(); ++i) CHECK(entries[i].first == PipelineConfig::keys()[i]);
}

TEST_CASE("config file parsing") {
  testing::TempDir dir("cfg");
  testing::write_text(dir / "a.cfg",
                      "# experiment\n"
                      "blocks = 4   # partitions\n"
                      "\n"
                      "lambda=0.02\r\n"
                      "search=approximate\n"
                      "one_to_one=false\n"
                      "align_form=dualamn\n"
                      "out=" + (dir / "o").string() + "\n");
  const auto c = load_config(dir / "a.cfg");
  CHECK(c.blocks == 4);
  CHECK(c.lambda == 0.02);
  CHECK(c.search.mode == SearchMode::Approximate);
  CHECK_FALSE(c.search.one_to_one);
  CHECK(c.train.align_form == AlignForm::DualAmn);
  CHECK(c.out == dir / "o");
  CHECK(c.eta == 0.001);

  // Settings round-trip through their echo.
  PipelineConfig again;
  for (const auto& [k, v] : c.entries()) again.set(k, v);
  CHECK(again.entries() == c.entries());

  PipelineConfig p;
  CHECK_THROWS_WITH_AS(p.set("colour", "red"), doctest::Contains("colour"), ValidationError);
  CHECK_THROWS_AS(p.set("blocks", "-1"), ValidationError);
  CHECK_THROWS_AS(p.set("blocks", "3x"), ValidationError);
  CHECK_THROWS_AS(p.set("lambda", "abc"), ValidationError);
  CHECK_THROWS_AS(p.set("one_to_one", "maybe"), ValidationError);
  CHECK_THROWS_AS(p.set("search", "fast"), ValidationError);
  testing::write_text(dir / "b.cfg", "blocks=2\nnonsense\n");
  CHECK_THROWS_WITH_AS(load_config(dir / "b.cfg"), doctest::Contains(":2:"), ValidationError);
  CHECK_THROWS_AS(load_config(dir / "missing.cfg"), ValidationError);
}

TEST_CASE("stages compose into the full run") {
  testing::TempDir dir("compose");
  const auto whole = small(dir / "whole");
  run_pipeline(whole);
  auto parts = small(dir / "parts");
  for (const char* s : {"synth", "partition", "landmarks", "train", "infer", "eval"}) run_stage(parts, s);
  for (const char* f : {"partition.txt", "partition_report.txt", "landmarks.txt", "checkpoint.bin", "train_log.txt",
                        "predictions.txt", "test_links", "data/rel_triples_1", "data/ent_links"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(whole.out / f));
    CHECK(testing::read_text(whole.out / f) == testing::read_text(parts.out / f));
  }
  // Only the echoed output directory differs.
  auto strip = [](std::string text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) {
      if (line.rfind("runtime_seconds=", 0) == 0 || line.rfind("config.out=", 0) == 0) continue;
      out += line + '\n';
    }
    return out;
  };
  CHECK(strip(testing::read_text(whole.out / "metrics.txt")) == strip(testing::read_text(parts.out / "metrics.txt")));
  const auto stats = read_stage_stats(parts.out);
  for (const char* s : {"synth", "partition", "landmarks", "train", "infer", "eval"}) CHECK(stats.count(s) == 1);
}

TEST_CASE("same seed twice gives the same metrics file") {
  testing::TempDir dir("repeat");
  const auto cfg = small(dir / "out");
  const auto first = run_pipeline(cfg);
  const auto a = stable_metrics(cfg.out / "metrics.txt");
  const auto pred = testing::read_text(cfg.out / "predictions.txt");
  const auto second = run_pipeline(cfg);
  CHECK(stable_metrics(cfg.out / "metrics.txt") == a);
  CHECK(testing::read_text(cfg.out / "predictions.txt") == pred);
  CHECK(first.real.f1 == second.real.f1);
  CHECK(first.ideal.mrr == second.ideal.mrr);

  auto other = cfg;
  other.seed = 18;
  run_pipeline(other);
  CHECK(testing::read_text(cfg.out / "predictions.txt") != pred);
}

TEST_CASE("metrics echo the resolved configuration") {
  testing::TempDir dir("echo");
  const auto cfg = small(dir / "out");
  const auto report = run_pipeline(cfg);
  const auto kv = read_key_values(cfg.out / "metrics.txt");
  for (const char* k : {"precision", "recall", "f1", "hits@1", "hits@5", "mrr", "runtime_seconds", "peak_memory_bytes"})
    CHECK(kv.count(k) == 1);
  PipelineConfig rebuilt;
  for (const auto& [k, v] : kv) {
    if (k.rfind("config.", 0) == 0) rebuilt.set(k.substr(7), v);
  }
  CHECK(rebuilt.entries() == cfg.entries());
  CHECK(report.peak_memory_bytes > 0);
  CHECK(std::stoll(kv.at("peak_memory_bytes")) == report.peak_memory_bytes);
}

TEST_CASE("partition stage alone") {
  testing::TempDir dir("isolation");
  auto cfg = small(dir / "out");
  run_stage(cfg, "synth");
  run_stage(cfg, "partition");
  CHECK(fs::exists(cfg.out / "partition.txt"));
  CHECK_FALSE(fs::exists(cfg.out / "landmarks.txt"));
  CHECK_FALSE(fs::exists(cfg.out / "checkpoint.bin"));
  const auto report = read_key_values(cfg.out / "partition_report.txt");
  CHECK(report.at("blocks") == "2");
  CHECK(std::stod(report.at("recall.train")) == 1.0);

  // Repeated partitioning over n gives one recall point per n.
  std::vector<double> curve;
  for (std::uint32_t n : {2u, 3u, 4u, 5u}) {
    cfg.blocks = n;
    run_stage(cfg, "partition");
    const auto kv = read_key_values(cfg.out / "partition_report.txt");
    CHECK(kv.at("blocks") == std::to_string(n));
    CHECK(std::stod(kv.at("recall.train")) == 1.0);
    const double r = std::stod(kv.at("recall.test"));
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    curve.push_back(r);
  }
  CHECK(curve.size() == 4);
}

TEST_CASE("inference from a stored checkpoint") {
  testing::TempDir dir("infer");
  auto cfg = small(dir / "out");
  run_pipeline(cfg);
  const auto expected = testing::read_text(cfg.out / "predictions.txt");
  const auto log = testing::read_text(cfg.out / "train_log.txt");
  fs::remove(cfg.out / "predictions.txt");
  run_stage(cfg, "infer");
  CHECK(testing::read_text(cfg.out / "predictions.txt") == expected);
  CHECK(testing::read_text(cfg.out / "train_log.txt") == log);  // no retraining

  // A different search setting reuses the same checkpoint.
  cfg.search.k = 1;
  run_stage(cfg, "infer");
  CHECK(fs::exists(cfg.out / "predictions.txt"));
}

TEST_CASE("missing prerequisites name the stage and the file") {
  testing::TempDir dir("missing");
  auto cfg = small(dir / "out");
  CHECK_THROWS_WITH_AS(run_stage(cfg, "partition"), doctest::Contains("stage partition"), ValidationError);
  run_stage(cfg, "synth");
  CHECK_THROWS_WITH_AS(run_stage(cfg, "landmarks"), doctest::Contains("partition.txt"), ValidationError);
  run_stage(cfg, "partition");
  CHECK_THROWS_WITH_AS(run_stage(cfg, "train"), doctest::Contains("landmarks.txt"), ValidationError);
  run_stage(cfg, "landmarks");
  CHECK_THROWS_WITH_AS(run_stage(cfg, "infer"), doctest::Contains("checkpoint.bin"), ValidationError);
  CHECK_THROWS_WITH_AS(run_stage(cfg, "eval"), doctest::Contains("predictions.txt"), ValidationError);
  CHECK_THROWS_AS(run_stage(cfg, "bogus"), ValidationError);
  // Earlier outputs survive a failed stage.
  CHECK(fs::exists(cfg.out / "partition.txt"));
}

TEST_CASE("more subgraphs lower the training peak") {
  testing::TempDir dir("peak");
  auto base = small(dir / "one");
  base.n_entities = 3000;
  base.budget = 100;
  base.train.dim = 64;
  base.train.proxies = 16;
  base.train.epochs = 1;
  base.train.n_cross = 64;
  auto one = base;
  one.blocks = 1;
  auto four = base;
  four.blocks = 4;
  four.out = dir / "four";
  four.dataset = (one.out / "data").string();
  run_pipeline(one);
  run_pipeline(four);
  const auto p1 = read_stage_stats(one.out).at("train").peak_bytes;
  const auto p4 = read_stage_stats(four.out).at("train").peak_bytes;
  MESSAGE("training peak: n=1 " << p1 << " bytes, n=4 " << p4 << " bytes");
  CHECK(p4 < p1);
}

TEST_CASE("command-line exit codes and flag overrides") {
  testing::TempDir dir("cli");
  const auto out = (dir / "out").string();
  const std::string common = " --out " + out + " --n_entities 200 --dim 8 --proxies 4 --n_cross 16 --epochs 1 --budget 20 --blocks 2 --quiet";
  CHECK(run_cli("pipeline" + common, dir / "ok.log") == 0);
  const auto kv = read_key_values(dir / "out" / "metrics.txt");
  CHECK(kv.at("config.blocks") == "2");
  CHECK(kv.at("config.dim") == "8");
  CHECK(testing::read_text(dir / "ok.log").find("f1=") != std::string::npos);

  // Flags override the file.
  testing::write_text(dir / "c.cfg", "blocks=3\nepochs=1\nseed=5\n");
  CHECK(run_cli("partition --config " + (dir / "c.cfg").string() + " --out " + out + " --blocks 4", dir / "p.log") == 0);
  CHECK(read_key_values(dir / "out" / "partition_report.txt").at("blocks") == "4");
  CHECK(run_cli("partition --config " + (dir / "c.cfg").string() + " --out " + out, dir / "p2.log") == 0);
  CHECK(read_key_values(dir / "out" / "partition_report.txt").at("blocks") == "3");

  CHECK(run_cli("partition --out " + out + " --blocks zero", dir / "bad.log") == 1);
  CHECK(run_cli("partition --out " + out + " --no-such-flag 1", dir / "flag.log") == 1);
  CHECK(run_cli("train --out " + (dir / "empty").string(), dir / "missing.log") == 1);
  CHECK(testing::read_text(dir / "missing.log").find("missing prerequisite") != std::string::npos);
  // Overflowing margin makes training fail at run time.
  CHECK(run_cli("pipeline" + common + " --beta 1e308", dir / "nan.log") == 2);
  CHECK(testing::read_text(dir / "nan.log").find("non-finite") != std::string::npos);
}
