// SPDX-License-Identifier: Apache-2.0
#include "largepig/cli.hpp"

#include "largepig/atomic_file.hpp"
#include "largepig/bench.hpp"
#include "largepig/dataset.hpp"
#include "largepig/decoder.hpp"
#include "largepig/error.hpp"
#include "largepig/random.hpp"
#include "largepig/run_config.hpp"
#include "largepig/synthetic.hpp"
#include "largepig/trace.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace largepig::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

using Override = std::function<void(RunConfig&)>;

/// Collects flag values and replays the ones actually given on top of a
/// config assembled from defaults and an optional --config file.
struct Flags {
  CLI::App* app = nullptr;
  std::vector<Override> overrides;
  std::shared_ptr<std::string> config_path = std::make_shared<std::string>();

  template <typename T, typename Apply>
  CLI::Option* add(const std::string& name, const std::string& help, Apply apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    overrides.push_back([opt, value, apply](RunConfig& rc) {
      if (opt->count() > 0) apply(rc, *value);
    });
    return opt;
  }

  template <typename T>
  CLI::Option* add_list(const std::string& name, const std::string& help,
                        std::vector<T> RunConfig::*field) {
    return add<std::vector<T>>(name, help, [field](RunConfig& rc, const std::vector<T>& v) { rc.*field = v; })
        ->delimiter(',');
  }

  template <typename T>
  CLI::Option* add_field(const std::string& name, const std::string& help, T RunConfig::*field) {
    return add<T>(name, help, [field](RunConfig& rc, const T& v) { rc.*field = v; });
  }

  void add_switch(const std::string& name, const std::string& help, bool RunConfig::*field, bool value) {
    CLI::Option* opt = app->add_flag(name, help);
    overrides.push_back([opt, field, value](RunConfig& rc) {
      if (opt->count() > 0) rc.*field = value;
    });
  }

  void add_common() {
    app->add_option("--config", *config_path, "JSON file with run settings (flags take precedence)");
    add_field("--out", "Output path (report JSON, or trace for trace-synth)", &RunConfig::out);
    add_field("--seed", "Master seed for all randomness", &RunConfig::seed);
  }

  void add_engine(bool with_layers) {
    add_list("--alpha", "Copy-probability scale; a comma list is a grid", &RunConfig::alpha);
    add<std::string>("--agg", "Divergence aggregation: mean|max|min",
                     [](RunConfig& rc, const std::string& v) { rc.aggregator = parse_aggregator(v); });
    add_field("--clip", "Ceiling for the copy probability", &RunConfig::clip);
    add_field("--temperature", "Softmax temperature of the vocabulary distribution", &RunConfig::temperature);
    add_list("--filter", "Token ids never pointed at", &RunConfig::filter);
    if (with_layers) {
      add_field("--layers", "Candidate layers: lastK, lastK:even, lastK:odd or a comma list",
                &RunConfig::layers);
      add<LayerIndex>("--anchor-layer", "Anchor layer (default: the backend's)",
                      [](RunConfig& rc, const LayerIndex& v) { rc.anchor_layer = v; });
      add<LayerIndex>("--attn-layer", "Attention layer; must match the trace",
                      [](RunConfig& rc, const LayerIndex& v) { rc.attn_layer = v; });
    }
  }

  void add_eval() {
    add_field("--data", "Dataset (.jsonl)", &RunConfig::data);
    add_field("--trace-dir", "Directory of scoring traces", &RunConfig::trace_dir);
    add_field("--folds", "Folds for selecting a grid value", &RunConfig::folds);
    add_field("--fold-seed", "Seed for the fold assignment", &RunConfig::fold_seed);
    add_field("--jobs", "Parallel scoring threads", &RunConfig::jobs);
    add_switch("--per-token", "Average log-probabilities per token", &RunConfig::per_token_average, true);
  }
};

RunConfig defaults_for(const std::string& command) {
  RunConfig rc;
  rc.command = command;
  if (command == "decode") rc.temperature = 0.8;
  if (command == "bench") rc.vocab = 32000;
  return rc;
}

RunConfig assemble(const std::string& command, const Flags& flags) {
  RunConfig rc = defaults_for(command);
  if (!flags.config_path->empty()) {
    json doc = json::parse(read_file(*flags.config_path), nullptr, false);
    require(!doc.is_discarded(), Errc::invalid_argument, *flags.config_path + ": not valid JSON");
    try {
      rc = RunConfig::from_json(doc, rc);
    } catch (const Error& e) {
      throw Error(e.code(), *flags.config_path + ": " + e.what());
    }
    if (rc.command != command) {
      spdlog::warn("config was written for '{}', running '{}'", rc.command, command);
      rc.command = command;
    }
  }
  for (const auto& apply : flags.overrides) apply(rc);
  return rc;
}

void require_path(const std::string& value, const char* flag) {
  require(!value.empty(), Errc::invalid_argument, std::string(flag) + " is required");
}

double single_alpha(const RunConfig& rc) {
  require(rc.alpha.size() == 1, Errc::invalid_argument, rc.command + " takes a single --alpha value");
  return rc.alpha.front();
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

/// Writes the report to --out, or to stdout when no path was given.
void emit(const RunConfig& rc, const ordered_json& report, std::ostream& out) {
  if (rc.out.empty()) {
    out << report.dump(2) << "\n";
  } else {
    write_report(rc.out, report);
    spdlog::info("wrote {}", rc.out);
  }
}

std::string fixed(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

/// Scores every reference, `jobs` at a time. The first failure is rethrown
/// after all workers stop.
std::vector<double> score_all(const std::vector<eval::CandidateRef>& refs, const eval::Scorer& scorer,
                              std::size_t jobs) {
  std::vector<double> results(refs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (!stop) {
      const std::size_t i = next++;
      if (i >= refs.size()) return;
      try {
        results[i] = scorer(refs[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(refs.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

/// Precomputes every candidate score so metric reduction is independent of
/// thread scheduling.
eval::Scorer cached(const std::vector<eval::CandidateRef>& refs, const eval::Scorer& scorer, std::size_t jobs) {
  auto values = std::make_shared<std::map<std::tuple<std::size_t, int, std::size_t>, double>>();
  const std::vector<double> scores = score_all(refs, scorer, jobs);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    values->emplace(std::tuple{refs[i].item, static_cast<int>(refs[i].role), refs[i].index}, scores[i]);
  }
  return [values](const eval::CandidateRef& ref) {
    return values->at({ref.item, static_cast<int>(ref.role), ref.index});
  };
}

ordered_json cross_validation_json(const RunConfig& rc, const std::vector<std::vector<double>>& item_scores,
                                   const char* criterion) {
  const auto folds = eval::assign_folds(item_scores.front().size(), rc.folds, rc.fold_seed);
  const eval::CrossValidation cv = eval::cross_validate(item_scores, folds, rc.folds);
  ordered_json chosen = ordered_json::array();
  for (std::size_t g : cv.chosen) chosen.push_back(rc.alpha[g]);
  ordered_json j;
  j["folds"] = rc.folds;
  j["fold_seed"] = rc.fold_seed;
  j["criterion"] = criterion;
  j["chosen_alpha"] = chosen;
  j["held_out"] = cv.held_out_score;
  return j;
}

int cmd_decode(const RunConfig& rc, std::ostream& out) {
  require_path(rc.trace, "--trace");
  const auto start = std::chrono::steady_clock::now();
  auto trace = std::make_shared<const TraceFile>(load_trace(rc.trace));
  TraceSession session(trace);
  const PigConfig config = bind_config(rc.pig_config(single_alpha(rc)), rc.layer_choice(), session.capabilities());
  spdlog::info("decode: {} candidate layers, anchor {}", config.layer_set.size(), config.anchor_layer);
  const GenerationResult result = generate(session, config, rc.sampling());

  const double mean_p_cp =
      result.p_cp.empty() ? 0.0
                          : std::accumulate(result.p_cp.begin(), result.p_cp.end(), 0.0) /
                                static_cast<double>(result.p_cp.size());
  ordered_json metrics;
  metrics["tokens"] = result.tokens;
  metrics["length"] = result.tokens.size();
  metrics["stop_reason"] = std::string(to_string(result.stop_reason));
  metrics["mean_p_cp"] = mean_p_cp;
  ordered_json items = ordered_json::array();
  for (std::size_t i = 0; i < result.tokens.size(); ++i) {
    items.push_back({{"step", i},
                     {"token", result.tokens[i]},
                     {"p_cp", result.p_cp[i]},
                     {"prob", result.chosen_prob[i]},
                     {"degenerate_span", static_cast<bool>(result.degenerate_span[i])}});
  }
  emit(rc, make_report(rc, metrics, items, {{"wall_ms", elapsed_ms(start)}}), out);
  if (!rc.out.empty()) {
    out << "generated " << result.tokens.size() << " tokens (" << to_string(result.stop_reason)
        << "), mean p_cp " << fixed(mean_p_cp) << "\n";
  }
  return kExitOk;
}

int cmd_score(const RunConfig& rc, const std::vector<TokenId>& tokens, std::ostream& out) {
  require_path(rc.trace, "--trace");
  const auto start = std::chrono::steady_clock::now();
  auto trace = std::make_shared<const TraceFile>(load_trace(rc.trace));
  const TokenSeq candidate = tokens.empty() ? forced_tokens(*trace) : tokens;
  ordered_json grid = ordered_json::array();
  ordered_json items = ordered_json::array();
  for (double alpha : rc.alpha) {
    TraceSession session(trace);
    const PigConfig config = bind_config(rc.pig_config(alpha), rc.layer_choice(), session.capabilities());
    const SequenceScore score = score_candidate(session, candidate, config);
    const double value = rc.per_token_average && !candidate.empty()
                             ? score.total / static_cast<double>(candidate.size())
                             : score.total;
    grid.push_back({{"alpha", alpha}, {"log_prob", value}});
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      items.push_back({{"alpha", alpha},
                       {"step", i},
                       {"token", candidate[i]},
                       {"log_prob", score.step_log_probs[i]},
                       {"p_cp", score.p_cp[i]}});
    }
    if (!rc.out.empty()) out << "alpha=" << alpha << " log_prob=" << fixed(value) << "\n";
  }
  ordered_json metrics;
  metrics["tokens"] = candidate;
  metrics["grid"] = grid;
  emit(rc, make_report(rc, metrics, items, {{"wall_ms", elapsed_ms(start)}}), out);
  return kExitOk;
}

int cmd_eval_mc(const RunConfig& rc, std::ostream& out) {
  require_path(rc.data, "--data");
  require_path(rc.trace_dir, "--trace-dir");
  const auto start = std::chrono::steady_clock::now();
  const eval::McDataset ds = eval::load_mc(rc.data);
  const eval::TraceIndex index = eval::TraceIndex::scan(rc.trace_dir);
  spdlog::info("eval-mc: {} items, best query {}, {} traces", ds.items.size(), to_string(ds.convention),
               index.size());

  std::vector<eval::CandidateRef> refs;
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    for (std::size_t k = 0; k < ds.items[i].good.size(); ++k) refs.push_back({i, eval::CandidateRole::good, k});
    for (std::size_t k = 0; k < ds.items[i].bad.size(); ++k) refs.push_back({i, eval::CandidateRole::bad, k});
  }

  ordered_json grid = ordered_json::array();
  ordered_json items = ordered_json::array();
  std::vector<std::vector<double>> item_mc2;
  for (double alpha : rc.alpha) {
    const eval::Scorer scorer = cached(
        refs, eval::mc_trace_scorer(ds.items, index, rc.pig_config(alpha), rc.layer_choice(), rc.per_token_average),
        rc.jobs);
    const eval::McResult r = eval::mc_metrics(ds.items, scorer, rc.mc3);
    grid.push_back({{"alpha", alpha}, {"mc1", r.mc1}, {"mc2", r.mc2}, {"mc3", r.mc3}});
    std::vector<double> mc2;
    for (std::size_t i = 0; i < r.items.size(); ++i) {
      const auto& row = r.items[i];
      mc2.push_back(row.mc2);
      items.push_back({{"alpha", alpha},
                       {"item", i},
                       {"mc1", row.mc1},
                       {"mc2", row.mc2},
                       {"good_wins", row.good_wins},
                       {"best_log_prob", row.best_log_prob},
                       {"good_log_probs", row.good_log_probs},
                       {"bad_log_probs", row.bad_log_probs}});
    }
    item_mc2.push_back(std::move(mc2));
    if (!rc.out.empty()) {
      out << "alpha=" << alpha << " MC1=" << fixed(r.mc1) << " MC2=" << fixed(r.mc2) << " MC3=" << fixed(r.mc3)
          << "\n";
    }
  }
  ordered_json metrics;
  metrics["best_query_convention"] = std::string(to_string(ds.convention));
  metrics["mc3_convention"] = rc.mc3 == eval::Mc3Convention::multiset ? "multiset" : "per-item";
  metrics["grid"] = grid;
  if (rc.folds > 1) metrics["cross_validation"] = cross_validation_json(rc, item_mc2, "mc2");
  emit(rc, make_report(rc, metrics, items, {{"wall_ms", elapsed_ms(start)}}), out);
  return kExitOk;
}

int cmd_eval_f1(const RunConfig& rc, std::ostream& out) {
  require_path(rc.data, "--data");
  const auto start = std::chrono::steady_clock::now();
  std::vector<eval::QaItem> items = eval::load_qa(rc.data);
  if (!rc.predictions.empty()) {
    const auto preds = eval::load_predictions(rc.predictions);
    require(preds.size() == items.size(), Errc::invalid_argument,
            rc.predictions + ": " + std::to_string(preds.size()) + " predictions for " +
                std::to_string(items.size()) + " items");
    for (std::size_t i = 0; i < items.size(); ++i) items[i].prediction = preds[i];
  }
  const eval::F1Result r = eval::f1_metrics(items, {rc.strip_articles});
  ordered_json metrics;
  metrics["f1"] = r.f1;
  metrics["f1_short"] = r.f1_short;
  metrics["f1_long"] = r.f1_long;
  metrics["short_count"] = r.short_count;
  metrics["long_count"] = r.long_count;
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    rows.push_back({{"item", i},
                    {"f1", r.per_item[i]},
                    {"length", items[i].length_class == eval::LengthClass::long_context ? "long" : "short"}});
  }
  emit(rc, make_report(rc, metrics, rows, {{"wall_ms", elapsed_ms(start)}}), out);
  if (!rc.out.empty()) {
    out << "F1=" << fixed(r.f1) << " short=" << fixed(r.f1_short) << " (" << r.short_count << ") long="
        << fixed(r.f1_long) << " (" << r.long_count << ")\n";
  }
  return kExitOk;
}

int cmd_eval_factor(const RunConfig& rc, std::ostream& out) {
  require_path(rc.data, "--data");
  require_path(rc.trace_dir, "--trace-dir");
  const auto start = std::chrono::steady_clock::now();
  const std::vector<eval::FactorItem> data = eval::load_factor(rc.data);
  const eval::TraceIndex index = eval::TraceIndex::scan(rc.trace_dir);

  std::vector<eval::CandidateRef> refs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < data[i].completions.size(); ++k) {
      refs.push_back({i, eval::CandidateRole::completion, k});
    }
  }
  ordered_json grid = ordered_json::array();
  ordered_json items = ordered_json::array();
  std::vector<std::vector<double>> item_hits;
  for (double alpha : rc.alpha) {
    const eval::Scorer scorer = cached(
        refs, eval::factor_trace_scorer(data, index, rc.pig_config(alpha), rc.layer_choice(), rc.per_token_average),
        rc.jobs);
    const eval::FactorResult r = eval::factor_accuracy(data, scorer);
    grid.push_back({{"alpha", alpha}, {"accuracy", r.accuracy}});
    std::vector<double> hits;
    for (std::size_t i = 0; i < data.size(); ++i) {
      hits.push_back(r.per_item[i] ? 1.0 : 0.0);
      items.push_back({{"alpha", alpha},
                       {"item", i},
                       {"correct", static_cast<bool>(r.per_item[i])},
                       {"log_probs", r.log_probs[i]}});
    }
    item_hits.push_back(std::move(hits));
    if (!rc.out.empty()) out << "alpha=" << alpha << " accuracy=" << fixed(r.accuracy) << "\n";
  }
  ordered_json metrics;
  metrics["grid"] = grid;
  if (rc.folds > 1) metrics["cross_validation"] = cross_validation_json(rc, item_hits, "accuracy");
  emit(rc, make_report(rc, metrics, items, {{"wall_ms", elapsed_ms(start)}}), out);
  return kExitOk;
}

int cmd_trace_synth(const RunConfig& rc, std::ostream& out) {
  require_path(rc.out, "--out");
  require(!rc.steps.empty(), Errc::invalid_argument, "--steps is required (e.g. f,f,c,f)");
  SyntheticSpec spec;
  spec.seed = rc.seed;
  spec.vocab_size = rc.vocab;
  spec.num_layers = rc.num_layers;
  spec.plan = parse_step_plan(rc.steps);
  spec.content_divergence_floor = rc.divergence_floor;
  spec.span_tokens = rc.span_tokens;
  SyntheticSession session(spec);

  json meta = rc.meta;
  meta["generator"] = "synthetic";
  meta["seed"] = rc.seed;
  meta["steps"] = format_step_plan(spec.plan);
  TraceFile trace;
  if (rc.forced.empty()) {
    trace = record_greedy(session, spec.plan.size(), meta);
  } else {
    require(rc.forced.size() <= spec.plan.size(), Errc::invalid_argument,
            "--forced has more tokens than --steps has steps");
    trace = record_forced(session, rc.forced, meta);
  }
  save_trace(rc.out, trace);
  out << "wrote " << trace.steps.size() << " steps to " << rc.out << "\n";
  return kExitOk;
}

int cmd_bench(const RunConfig& rc, std::ostream& out) {
  PigConfig config = rc.pig_config(single_alpha(rc));
  const BenchStats s = bench_step(config, rc.vocab, rc.bench_layers, rc.repetitions, rc.seed);
  ordered_json metrics;
  metrics["vocab"] = s.vocab_size;
  metrics["layers"] = s.layer_count;
  metrics["repetitions"] = s.repetitions;
  metrics["median_ms"] = s.median_ms;
  metrics["p99_ms"] = s.p99_ms;
  metrics["mean_ms"] = s.mean_ms;
  metrics["baseline_median_ms"] = s.baseline_median_ms;
  metrics["ratio_vs_baseline"] = s.ratio;
  emit(rc, make_report(rc, metrics, ordered_json::array(), {{"wall_ms", s.wall_ms}}), out);
  if (!rc.out.empty()) {
    out << "decode_step median " << fixed(s.median_ms) << " ms, p99 " << fixed(s.p99_ms) << " ms, baseline "
        << fixed(s.baseline_median_ms) << " ms, ratio " << std::setprecision(2) << s.ratio << "\n";
  }
  return kExitOk;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_st("largepig");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("PIG_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pointer-generator decoding over recorded model traces", "largepig"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    Flags flags;
  };
  std::map<std::string, Command> commands;
  auto add_command = [&](const std::string& name, const std::string& help) -> Flags& {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, help);
    c.flags.app = c.app;
    c.flags.add_common();
    return c.flags;
  };

  Flags& decode = add_command("decode", "Generate from a trace with the mixed distribution");
  decode.add_engine(true);
  decode.add_field("--trace", "Trace file (.pigtrace)", &RunConfig::trace);
  decode.add<std::string>("--mode", "greedy|temperature",
                          [](RunConfig& rc, const std::string& v) { rc.mode = parse_sampling_mode(v); });
  decode.add_field("--max-new-tokens", "Generation length limit", &RunConfig::max_new_tokens);
  decode.add_list("--stop", "Stop token ids", &RunConfig::stop);

  Flags& score = add_command("score", "Teacher-forced log-probability of a scoring trace");
  score.add_engine(true);
  score.add_field("--trace", "Trace file (.pigtrace)", &RunConfig::trace);
  score.add_switch("--per-token", "Average log-probabilities per token", &RunConfig::per_token_average, true);
  std::vector<TokenId> score_tokens;
  score.app->add_option("--tokens", score_tokens, "Candidate token ids (default: the trace's forced tokens)")
      ->delimiter(',');

  Flags& mc = add_command("eval-mc", "MC1/MC2/MC3 over a dataset and its scoring traces");
  mc.add_engine(true);
  mc.add_eval();
  mc.add<std::string>("--mc3", "MC3 denominator: multiset|per-item", [](RunConfig& rc, const std::string& v) {
    if (v == "multiset") {
      rc.mc3 = eval::Mc3Convention::multiset;
    } else if (v == "per-item") {
      rc.mc3 = eval::Mc3Convention::per_item;
    } else {
      fail(Errc::invalid_argument, "--mc3 must be multiset|per-item");
    }
  });

  Flags& f1 = add_command("eval-f1", "SQuAD-style token F1 of predictions");
  f1.add_field("--data", "QA dataset (.jsonl)", &RunConfig::data);
  f1.add_field("--pred", "Predictions, one per line", &RunConfig::predictions);
  f1.add_switch("--keep-articles", "Do not strip a/an/the before matching", &RunConfig::strip_articles, false);

  Flags& factor = add_command("eval-factor", "Completion-ranking accuracy over scoring traces");
  factor.add_engine(true);
  factor.add_eval();

  Flags& synth = add_command("trace-synth", "Write a seeded synthetic trace");
  synth.add_field("--steps", "Step plan, e.g. f,f,c,f", &RunConfig::steps);
  synth.add_field("--vocab", "Vocabulary size", &RunConfig::vocab);
  synth.add_field("--layers", "Number of layers; the last is the anchor", &RunConfig::num_layers);
  synth.add_field("--floor", "Minimum divergence of content steps", &RunConfig::divergence_floor);
  synth.add_list("--span-tokens", "Source-span token ids", &RunConfig::span_tokens);
  synth.add_list("--forced", "Teacher-force these tokens (scoring trace)", &RunConfig::forced);
  synth.add<std::string>("--meta", "JSON object stored in the trace header", [](RunConfig& rc, const std::string& v) {
    json meta = json::parse(v, nullptr, false);
    require(!meta.is_discarded() && meta.is_object(), Errc::invalid_argument, "--meta must be a JSON object");
    rc.meta = std::move(meta);
  });

  Flags& bench = add_command("bench", "Time decode_step against a plain softmax");
  bench.add_engine(false);
  bench.add_field("--vocab", "Vocabulary size", &RunConfig::vocab);
  bench.add_field("--layers", "Number of candidate layers", &RunConfig::bench_layers);
  bench.add_field("--reps", "Timed repetitions (at least 100)", &RunConfig::repetitions);

  std::vector<const char*> argv{"largepig"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  for (auto& [name, command] : commands) {
    if (!command.app->parsed()) continue;
    const RunConfig rc = assemble(name, command.flags);
    spdlog::debug("config {}", rc.fingerprint());
    if (name == "decode") return cmd_decode(rc, out);
    if (name == "score") return cmd_score(rc, score_tokens, out);
    if (name == "eval-mc") return cmd_eval_mc(rc, out);
    if (name == "eval-f1") return cmd_eval_f1(rc, out);
    if (name == "eval-factor") return cmd_eval_factor(rc, out);
    if (name == "trace-synth") return cmd_trace_synth(rc, out);
    if (name == "bench") return cmd_bench(rc, out);
  }
  fail(Errc::internal, "no subcommand dispatched");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (!spdlog::get("largepig")) configure_logging();
  try {
    return dispatch(args, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::internal ? kExitInternal : kExitInput;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace largepig::cli
