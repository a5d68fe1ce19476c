// SPDX-License-Identifier: Apache-2.0
#include "largepig/atomic_file.hpp"
#include "largepig/cli.hpp"
#include "largepig/run_config.hpp"
#include "largepig/synthetic.hpp"
#include "largepig/trace.hpp"

#include "../oracle/reference.hpp"
#include "../support/generators.hpp"
#include "../support/tempdir.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace largepig;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json read_json(const std::filesystem::path& p) { return json::parse(read_file(p)); }

/// Log-probability of a scoring trace's forced tokens computed step by step
/// with the brute-force reference.
double oracle_score(const std::filesystem::path& file, double alpha) {
  auto trace = std::make_shared<const TraceFile>(load_trace(file));
  TraceSession session(trace);
  PigConfig base;
  base.alpha = alpha;
  const PigConfig config = bind_config(base, LayerChoice{}, session.capabilities());
  double total = 0.0;
  for (TokenId token : forced_tokens(*trace)) {
    const StepTrace step = session.next_step(token);
    const auto r = reference::step(gen::to_reference(step), gen::to_reference(config));
    total += std::log(r.output[static_cast<std::size_t>(token)]);
  }
  return total;
}

double oracle_mc2(const std::vector<double>& good, const std::vector<double>& bad) {
  double g = 0.0;
  double b = 0.0;
  for (double v : good) g += std::exp(v);
  for (double v : bad) b += std::exp(v);
  return g / (g + b);
}

}  // namespace

TEST(Cli, TraceSynthIsByteIdentical) {
  fixture::TempDir dir;
  const std::vector<std::string> base{"trace-synth", "--steps", "f,c,f,c,c", "--seed", "7", "--vocab", "32"};
  auto a = base;
  a.insert(a.end(), {"--out", (dir / "a.pigtrace").string()});
  auto b = base;
  b.insert(b.end(), {"--out", (dir / "b.pigtrace").string()});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  EXPECT_EQ(read_file(dir / "a.pigtrace"), read_file(dir / "b.pigtrace"));
  const TraceFile t = load_trace(dir / "a.pigtrace");
  EXPECT_EQ(t.steps.size(), 5u);
  EXPECT_EQ(t.header.vocab_size, 32);
  EXPECT_EQ(t.header.meta["seed"], 7);
  EXPECT_EQ(t.header.meta["steps"], "f,c,f,c,c");
}

TEST(Cli, DecodeWritesAReport) {
  fixture::TempDir dir;
  ASSERT_EQ(run({"trace-synth", "--steps", "f,c,c,f", "--out", (dir / "t.pigtrace").string()}).code, 0);
  const auto r = run({"decode", "--trace", (dir / "t.pigtrace").string(), "--mode", "greedy", "--alpha", "500",
                      "--out", (dir / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("generated 4 tokens"), std::string::npos) << r.out;
  const json report = read_json(dir / "r.json");
  EXPECT_EQ(report["config"]["command"], "decode");
  EXPECT_EQ(report["config"]["mode"], "greedy");
  EXPECT_EQ(report["config_fingerprint"].get<std::string>().size(), 64u);
  EXPECT_TRUE(report.contains("metrics"));
  EXPECT_TRUE(report.contains("timing"));
}

TEST(Cli, ReportGoesToStdoutWithoutOut) {
  fixture::TempDir dir;
  ASSERT_EQ(run({"trace-synth", "--steps", "c,c", "--forced", "1,2", "--out", (dir / "t.pigtrace").string()}).code,
            0);
  const auto r = run({"score", "--trace", (dir / "t.pigtrace").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(r.out);
  EXPECT_EQ(report["config"]["command"], "score");
  EXPECT_NEAR(report["metrics"]["grid"][0]["log_prob"].get<double>(), oracle_score(dir / "t.pigtrace", 500),
              1e-9);
}

/// Records a scoring trace for `forced` through the CLI.
void synth(const fixture::TempDir& dir, const std::string& name, int seed, const std::string& forced,
           const std::string& item, const std::string& candidate) {
  const std::size_t steps = static_cast<std::size_t>(std::count(forced.begin(), forced.end(), ',')) + 1;
  std::string plan = "c";
  for (std::size_t i = 1; i < steps; ++i) plan += ",c";
  const auto r = run({"trace-synth", "--steps", plan, "--seed", std::to_string(seed), "--forced", forced,
                      "--span-tokens", "3,4,9", "--out", (dir / name).string(), "--meta",
                      R"({"item": )" + item + R"(, "candidate": ")" + candidate + R"("})"});
  ASSERT_EQ(r.code, 0) << r.err;
}

TEST(Cli, EvalMcMatchesTheReference) {
  fixture::TempDir dir;
  dir.write("mc.jsonl",
            R"({"content": [1, 2], "best_query": [3, 4], "good_queries": [[3, 5]], "bad_queries": [[6, 7], [8]]})"
            "\n"
            R"({"content": [2], "best_query": [9], "good_queries": [[9]], "bad_queries": [[10]]})"
            "\n");
  fixture::TempDir traces;
  synth(traces, "0-best.pigtrace", 1, "3,4", "0", "best");
  synth(traces, "0-good0.pigtrace", 2, "3,5", "0", "good/0");
  synth(traces, "0-bad0.pigtrace", 3, "6,7", "0", "bad/0");
  synth(traces, "0-bad1.pigtrace", 4, "8", "0", "bad/1");
  synth(traces, "1-good0.pigtrace", 5, "9", "1", "good/0");
  synth(traces, "1-bad0.pigtrace", 6, "10", "1", "bad/0");

  const auto r = run({"eval-mc", "--data", (dir / "mc.jsonl").string(), "--trace-dir", traces.path().string(),
                      "--alpha", "0,500", "--out", (dir / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("alpha=0 MC1="), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("alpha=500 MC1="), std::string::npos) << r.out;
  const json report = read_json(dir / "r.json");
  EXPECT_EQ(report["metrics"]["best_query_convention"], "mixed");
  ASSERT_EQ(report["metrics"]["grid"].size(), 2u);

  for (std::size_t g = 0; g < 2; ++g) {
    const double alpha = g == 0 ? 0.0 : 500.0;
    auto score = [&](const char* name) { return oracle_score(traces / name, alpha); };
    const std::vector<double> good0{score("0-best.pigtrace"), score("0-good0.pigtrace")};
    const std::vector<double> bad0{score("0-bad0.pigtrace"), score("0-bad1.pigtrace")};
    const std::vector<double> good1{score("1-good0.pigtrace")};
    const std::vector<double> bad1{score("1-bad0.pigtrace")};
    const double top0 = std::max(bad0[0], bad0[1]);
    const double mc1 = ((good0[0] > top0) + (good1[0] > bad1[0])) / 2.0;
    const double mc2 = (oracle_mc2(good0, bad0) + oracle_mc2(good1, bad1)) / 2.0;
    const double mc3 = ((good0[0] > top0) + (good0[1] > top0) + (good1[0] > bad1[0])) / 3.0;
    const json& row = report["metrics"]["grid"][g];
    EXPECT_EQ(row["alpha"].get<double>(), alpha);
    EXPECT_EQ(row["mc1"].get<double>(), mc1);
    EXPECT_NEAR(row["mc2"].get<double>(), mc2, 1e-9);
    EXPECT_NEAR(row["mc3"].get<double>(), mc3, 1e-12);
    const json& item0 = report["items"][g * 2];
    EXPECT_NEAR(item0["best_log_prob"].get<double>(), good0[0], 1e-9);
    EXPECT_NEAR(item0["bad_log_probs"][1].get<double>(), bad0[1], 1e-9);
  }

  // Parallel scoring and cross-validation leave the per-alpha numbers alone.
  const auto parallel = run({"eval-mc", "--data", (dir / "mc.jsonl").string(), "--trace-dir",
                             traces.path().string(), "--alpha", "0,500", "--jobs", "3", "--folds", "2"});
  ASSERT_EQ(parallel.code, 0) << parallel.err;
  const json p = json::parse(parallel.out);
  EXPECT_EQ(p["metrics"]["grid"], report["metrics"]["grid"]);
  EXPECT_EQ(p["metrics"]["cross_validation"]["criterion"], "mc2");
  EXPECT_EQ(p["metrics"]["cross_validation"]["chosen_alpha"].size(), 2u);
  EXPECT_EQ(p["config_fingerprint"].get<std::string>().size(), 64u);
}

TEST(Cli, EvalMcMissingTraceIsAnInputError) {
  fixture::TempDir dir;
  dir.write("mc.jsonl", R"({"content": [1], "best_query": [3], "good_queries": [], "bad_queries": [[6]]})");
  fixture::TempDir traces;
  synth(traces, "best.pigtrace", 1, "3", "0", "best");
  const auto r = run({"eval-mc", "--data", (dir / "mc.jsonl").string(), "--trace-dir", traces.path().string()});
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_NE(r.err.find("bad/0"), std::string::npos) << r.err;
}

TEST(Cli, EvalF1) {
  fixture::TempDir dir;
  dir.write("qa.jsonl", R"({"context": "c", "question": "q", "answers": ["cat sat"]})"
                        "\n"
                        R"({"context": "c", "question": "q", "answers": ["Paris"], "prediction": "Paris"})");
  dir.write("pred.jsonl", "\"the cat sat\"\n\"London\"\n");
  auto r = run({"eval-f1", "--data", (dir / "qa.jsonl").string(), "--pred", (dir / "pred.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_DOUBLE_EQ(json::parse(r.out)["metrics"]["f1"].get<double>(), 0.5);
  r = run({"eval-f1", "--data", (dir / "qa.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  // The first record has no inline prediction and scores 0.
  EXPECT_DOUBLE_EQ(json::parse(r.out)["metrics"]["f1"].get<double>(), 0.5);
  r = run({"eval-f1", "--data", (dir / "qa.jsonl").string(), "--pred", (dir / "pred.jsonl").string(),
           "--keep-articles"});
  EXPECT_DOUBLE_EQ(json::parse(r.out)["metrics"]["f1"].get<double>(), 0.4);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, cli::kExitInput);
  EXPECT_EQ(run({"decode", "--bogus"}).code, cli::kExitInput);
  EXPECT_EQ(run({"decode"}).code, cli::kExitInput);
  EXPECT_EQ(run({"decode", "--trace", "/nonexistent.pigtrace"}).code, cli::kExitInput);
  EXPECT_EQ(run({"decode", "--trace", "x", "--mode", "beam"}).code, cli::kExitInput);
  EXPECT_EQ(run({"trace-synth", "--steps", "f", "--out", "/proc/x.pigtrace"}).code, cli::kExitInput);
  EXPECT_EQ(run({"trace-synth", "--steps", "f,q", "--out", "x.pigtrace"}).code, cli::kExitInput);
  EXPECT_EQ(run({"eval-mc", "--mc3", "neither", "--data", "d", "--trace-dir", "t"}).code, cli::kExitInput);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
  const auto bad = run({"bench", "--reps", "5"});
  EXPECT_EQ(bad.code, cli::kExitInput);
  EXPECT_NE(bad.err.find("error: "), std::string::npos);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  fixture::TempDir dir;
  ASSERT_EQ(run({"trace-synth", "--steps", "c,c", "--forced", "1,2", "--out", (dir / "t.pigtrace").string()}).code,
            0);
  dir.write("cfg.json", json{{"command", "score"}, {"alpha", {100.0, 200.0}}, {"clip", 0.25}}.dump());
  const auto r = run({"score", "--config", (dir / "cfg.json").string(), "--trace", (dir / "t.pigtrace").string(),
                      "--alpha", "300"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(r.out);
  EXPECT_EQ(report["config"]["alpha"], json::array({300.0}));
  EXPECT_EQ(report["config"]["clip"], 0.25);

  dir.write("bad.json", R"({"alpah": 3})");
  const auto e = run({"score", "--config", (dir / "bad.json").string(), "--trace", (dir / "t.pigtrace").string()});
  EXPECT_EQ(e.code, cli::kExitInput);
  EXPECT_NE(e.err.find("alpah"), std::string::npos) << e.err;
}

TEST(RunConfig, JsonRoundTripAndFingerprint) {
  RunConfig rc;
  rc.command = "eval-mc";
  rc.alpha = {0, 10, 500};
  rc.aggregator = Aggregator::mean;
  rc.anchor_layer = 32;
  rc.filter = {1, 2};
  rc.mc3 = eval::Mc3Convention::per_item;
  rc.meta = {{"k", "v"}};
  const RunConfig back = RunConfig::from_json(rc.to_json());
  EXPECT_EQ(back.to_json(), rc.to_json());
  EXPECT_EQ(back.fingerprint(), rc.fingerprint());

  RunConfig moved = rc;
  moved.out = "elsewhere.json";
  moved.jobs = 8;
  EXPECT_EQ(moved.fingerprint(), rc.fingerprint());
  moved.clip = 0.4;
  EXPECT_NE(moved.fingerprint(), rc.fingerprint());

  EXPECT_THROW(RunConfig::from_json(json{{"nope", 1}}), Error);
  EXPECT_EQ(RunConfig::from_json(json{{"alpha", 7}}).alpha, std::vector<double>{7.0});
}

TEST(RunConfig, Sha256) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
