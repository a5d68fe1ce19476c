// SPDX-License-Identifier: Apache-2.0
#include "largepig/dataset.hpp"
#include "largepig/decoder.hpp"
#include "largepig/synthetic.hpp"
#include "largepig/trace.hpp"

#include "../support/tempdir.hpp"

#include <gtest/gtest.h>

#include <string>

using namespace largepig;
using namespace largepig::eval;

namespace {

/// Returns the message of the largepig::Error thrown by `fn`.
template <typename Fn>
std::string error_of(Fn&& fn, Errc expected = Errc::schema) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), expected) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no error thrown";
  return {};
}

SyntheticSpec scoring_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.seed = seed;
  s.span_tokens = {3, 5};
  s.plan = parse_step_plan("c,f,c,c");
  return s;
}

void record(const fixture::TempDir& dir, const std::string& name, std::uint64_t seed, const TokenSeq& tokens,
            nlohmann::json meta) {
  SyntheticSession session(scoring_spec(seed));
  save_trace(dir / name, record_forced(session, tokens, std::move(meta)));
}

}  // namespace

TEST(McLoader, Conventions) {
  const McDataset included = parse_mc(
      R"({"content": "c", "best_query": "b", "good_queries": ["x", "b"], "bad_queries": ["z"]})"
      "\n");
  EXPECT_EQ(included.convention, BestConvention::included);
  EXPECT_EQ(included.items[0].best, 1u);
  EXPECT_EQ(included.items[0].good.size(), 2u);
  EXPECT_TRUE(included.items[0].best_listed_in_good);

  const McDataset separate = parse_mc(
      R"({"content": "c", "best_query": "b", "good_queries": ["x"], "bad_queries": ["z"]})"
      "\n\n"
      R"({"content": [1, 2], "best_query": [4], "good_queries": [], "bad_queries": [[5, 6]]})");
  EXPECT_EQ(separate.convention, BestConvention::separate);
  ASSERT_EQ(separate.items.size(), 2u);
  EXPECT_EQ(separate.items[0].best, 0u);
  EXPECT_EQ(separate.items[0].good[0].text, "b");
  EXPECT_EQ(separate.items[0].good[1].text, "x");
  EXPECT_EQ(separate.items[1].content_tokens, (TokenSeq{1, 2}));
  EXPECT_EQ(separate.items[1].good[0].tokens, TokenSeq{4});
  EXPECT_EQ(separate.items[1].bad[0].tokens, (TokenSeq{5, 6}));

  const McDataset mixed = parse_mc(
      R"({"content": "c", "best_query": "b", "good_queries": ["b"], "bad_queries": ["z"]})"
      "\n"
      R"({"content": "c", "best_query": "b", "good_queries": ["x"], "bad_queries": ["z"]})");
  EXPECT_EQ(mixed.convention, BestConvention::mixed);
  EXPECT_EQ(to_string(BestConvention::mixed), "mixed");
}

TEST(McLoader, ErrorsNameLineAndField) {
  const std::string good = R"({"content": "c", "best_query": "b", "good_queries": [], "bad_queries": ["z"]})";
  auto msg = error_of([&] {
    parse_mc(good + "\n" + R"({"content": "c", "best_query": "b", "good_queries": []})");
  });
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'bad_queries'"), std::string::npos) << msg;

  msg = error_of([&] {
    parse_mc(R"({"content": "c", "best_query": "b", "good_queries": [], "bad_queries": []})");
  });
  EXPECT_NE(msg.find("'bad_queries'"), std::string::npos) << msg;

  msg = error_of([&] {
    parse_mc(R"({"content": "c", "best_query": 7, "good_queries": [], "bad_queries": ["z"]})");
  });
  EXPECT_NE(msg.find("'best_query'"), std::string::npos) << msg;

  msg = error_of([&] {
    parse_mc(R"({"content": "c", "best_query": "b", "good_queries": [[1, -2]], "bad_queries": ["z"]})");
  });
  EXPECT_NE(msg.find("'good_queries[0]'"), std::string::npos) << msg;

  msg = error_of([&] { parse_mc("\n{not json\n"); });
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  error_of([&] { parse_mc("\n\n"); });
}

TEST(McLoader, FileErrorsNameThePath) {
  fixture::TempDir dir;
  const auto path = dir.write("mc.jsonl", R"({"content": "c"})");
  const auto msg = error_of([&] { load_mc(path); });
  EXPECT_NE(msg.find(path.string()), std::string::npos) << msg;
  EXPECT_NE(msg.find("'best_query'"), std::string::npos) << msg;
  error_of([&] { load_mc(dir / "missing.jsonl"); }, Errc::io);
}

TEST(QaLoader, ParsesAndClassifies) {
  std::string long_context;
  for (int i = 0; i < 250; ++i) long_context += "word ";
  const auto items = parse_qa(R"({"context": "short one", "question": "q", "answers": ["a", "b"]})"
                              "\n" +
                              nlohmann::json{{"context", long_context},
                                             {"question", "q"},
                                             {"answers", {"x"}},
                                             {"prediction", "x"}}
                                  .dump());
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[0].answers.size(), 2u);
  EXPECT_EQ(items[0].prediction, "");
  EXPECT_EQ(items[0].length_class, LengthClass::short_context);
  EXPECT_EQ(items[1].length_class, LengthClass::long_context);
  EXPECT_EQ(items[1].prediction, "x");

  const auto msg = error_of([] { parse_qa(R"({"context": "c", "question": "q", "answers": []})"); });
  EXPECT_NE(msg.find("'answers'"), std::string::npos) << msg;
}

TEST(QaLoader, Predictions) {
  fixture::TempDir dir;
  const auto ok = dir.write("pred.jsonl", "\"one\"\n{\"prediction\": \"two\"}\n\n");
  EXPECT_EQ(load_predictions(ok), (std::vector<std::string>{"one", "two"}));
  const auto bad = dir.write("bad.jsonl", "\"one\"\n{\"text\": \"two\"}\n");
  const auto msg = error_of([&] { load_predictions(bad); });
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST(FactorLoader, ParsesAndValidates) {
  const auto items = parse_factor(R"({"prefix": [1, 2], "completions": [[3], [4, 5]], "correct_index": 1})");
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].prefix_tokens, (TokenSeq{1, 2}));
  EXPECT_EQ(items[0].correct, 1u);
  EXPECT_EQ(items[0].completions[1].tokens, (TokenSeq{4, 5}));

  auto msg = error_of([] { parse_factor(R"({"prefix": "p", "completions": ["a", "b"], "correct_index": 2})"); });
  EXPECT_NE(msg.find("'correct_index'"), std::string::npos) << msg;
  msg = error_of([] { parse_factor(R"({"prefix": "p", "completions": ["a"], "correct_index": 0})"); });
  EXPECT_NE(msg.find("'completions'"), std::string::npos) << msg;
}

TEST(TraceKeys, FollowTheFileConvention) {
  McItem listed;
  listed.good.resize(3);
  listed.bad.resize(1);
  listed.best = 1;
  listed.best_listed_in_good = true;
  EXPECT_EQ(trace_keys(listed, {0, CandidateRole::good, 1}), (std::vector<std::string>{"good/1", "best"}));
  EXPECT_EQ(trace_keys(listed, {0, CandidateRole::good, 2}), std::vector<std::string>{"good/2"});
  EXPECT_EQ(trace_keys(listed, {0, CandidateRole::bad, 0}), std::vector<std::string>{"bad/0"});

  McItem prepended;
  prepended.good.resize(3);
  prepended.bad.resize(1);
  EXPECT_EQ(trace_keys(prepended, {0, CandidateRole::good, 0}), std::vector<std::string>{"best"});
  EXPECT_EQ(trace_keys(prepended, {0, CandidateRole::good, 2}), std::vector<std::string>{"good/1"});
  EXPECT_EQ(trace_keys(prepended, {0, CandidateRole::completion, 4}), std::vector<std::string>{"completion/4"});
}

TEST(TraceIndex, FromMetadata) {
  fixture::TempDir dir;
  record(dir, "a.pigtrace", 1, {3}, {{"item", 0}, {"candidate", "best"}});
  record(dir, "b.pigtrace", 2, {4, 4}, {{"item", 1}, {"candidate", "bad/0"}});
  dir.write("notes.txt", "ignored");
  const TraceIndex index = TraceIndex::scan(dir.path());
  EXPECT_EQ(index.size(), 2u);
  EXPECT_EQ(index.find(0, "best"), dir / "a.pigtrace");
  EXPECT_EQ(index.find(1, "bad/0"), dir / "b.pigtrace");
  EXPECT_FALSE(index.find(1, "best").has_value());

  record(dir, "c.pigtrace", 3, {1}, {{"item", 0}, {"candidate", "best"}});
  const auto msg = error_of([&] { TraceIndex::scan(dir.path()); });
  EXPECT_NE(msg.find("two traces"), std::string::npos) << msg;
}

TEST(TraceIndex, MissingMetadata) {
  fixture::TempDir dir;
  record(dir, "a.pigtrace", 1, {3}, {{"item", 0}});
  const auto msg = error_of([&] { TraceIndex::scan(dir.path()); });
  EXPECT_NE(msg.find("'meta'"), std::string::npos) << msg;
  error_of([&] { TraceIndex::scan(dir / "nowhere"); }, Errc::io);
}

TEST(TraceIndex, ManifestWins) {
  fixture::TempDir dir;
  record(dir, "x.pigtrace", 1, {3}, nlohmann::json::object());
  dir.write("manifest.jsonl", R"({"item": 4, "candidate": "good/2", "file": "x.pigtrace"})"
                              "\n");
  const TraceIndex index = TraceIndex::scan(dir.path());
  EXPECT_EQ(index.size(), 1u);
  EXPECT_EQ(index.find(4, "good/2"), dir / "x.pigtrace");

  dir.write("manifest.jsonl", R"({"item": -1, "candidate": "good/2", "file": "x.pigtrace"})");
  const auto msg = error_of([&] { TraceIndex::scan(dir.path()); });
  EXPECT_NE(msg.find("manifest.jsonl"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'item'"), std::string::npos) << msg;
}

TEST(ScoreTrace, MatchesLiveScoring) {
  fixture::TempDir dir;
  const TokenSeq tokens{3, 7, 5, 5};
  record(dir, "t.pigtrace", 21, tokens, nlohmann::json::object());
  PigConfig base;
  base.alpha = 500;
  const LayerChoice layers;
  const double replayed = score_trace(dir / "t.pigtrace", tokens, base, layers);

  SyntheticSession live(scoring_spec(21));
  const double direct = score_sequence(live, tokens, bind_config(base, layers, live.capabilities()));
  EXPECT_EQ(replayed, direct);
  EXPECT_EQ(score_trace(dir / "t.pigtrace", {}, base, layers), direct);
  EXPECT_DOUBLE_EQ(score_trace(dir / "t.pigtrace", tokens, base, layers, true), direct / 4);

  const auto msg = error_of([&] { score_trace(dir / "t.pigtrace", {3, 7}, base, layers); });
  EXPECT_NE(msg.find("disagree"), std::string::npos) << msg;
}

TEST(ScoreTrace, RejectsGenerationTraces) {
  fixture::TempDir dir;
  SyntheticSpec spec = scoring_spec(5);
  spec.plan = parse_step_plan("c,c");
  SyntheticSession session(spec);
  save_trace(dir / "g.pigtrace", record_greedy(session, 2, nlohmann::json::object()));
  const auto msg = error_of([&] { score_trace(dir / "g.pigtrace", {}, PigConfig{}, LayerChoice{}); });
  EXPECT_NE(msg.find("force"), std::string::npos) << msg;
}

TEST(TraceScorer, McThroughDirectory) {
  fixture::TempDir dir;
  // Separate convention: the best query is prepended to the good list.
  const McDataset ds = parse_mc(
      R"({"content": [1], "best_query": [3], "good_queries": [[5]], "bad_queries": [[7, 7]]})");
  record(dir, "0.pigtrace", 31, {3}, {{"item", 0}, {"candidate", "best"}});
  record(dir, "1.pigtrace", 32, {5}, {{"item", 0}, {"candidate", "good/0"}});
  record(dir, "2.pigtrace", 33, {7, 7}, {{"item", 0}, {"candidate", "bad/0"}});
  const TraceIndex index = TraceIndex::scan(dir.path());
  PigConfig base;
  const Scorer scorer = mc_trace_scorer(ds.items, index, base, LayerChoice{});
  EXPECT_EQ(scorer({0, CandidateRole::good, 0}), score_trace(dir / "0.pigtrace", {3}, base, LayerChoice{}));
  EXPECT_EQ(scorer({0, CandidateRole::good, 1}), score_trace(dir / "1.pigtrace", {5}, base, LayerChoice{}));
  EXPECT_EQ(scorer({0, CandidateRole::bad, 0}), score_trace(dir / "2.pigtrace", {7, 7}, base, LayerChoice{}));
  const McResult m = mc_metrics(ds.items, scorer);
  EXPECT_EQ(m.items.size(), 1u);

  const McDataset missing = parse_mc(
      R"({"content": [1], "best_query": [3], "good_queries": [], "bad_queries": [[7, 7], [8]]})");
  const Scorer partial = mc_trace_scorer(missing.items, index, base, LayerChoice{});
  error_of([&] { partial({0, CandidateRole::bad, 1}); }, Errc::io);
}
