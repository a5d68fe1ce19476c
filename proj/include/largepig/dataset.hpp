// SPDX-License-Identifier: Apache-2.0
//
// Line-delimited dataset readers and trace-backed candidate scoring.
//
//   MC:     {"content", "best_query", "good_queries", "bad_queries"}
//   QA:     {"context", "question", "answers", "prediction"?}
//   FACTOR: {"prefix", "completions", "correct_index"}
//
// A candidate is either a string or an array of token ids. Errors name the
// file line and the offending field.
#pragma once

#include "largepig/backend.hpp"
#include "largepig/engine.hpp"
#include "largepig/eval.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace largepig::eval {

/// How an MC file relates its best query to its good queries.
enum class BestConvention { included, separate, mixed };

std::string_view to_string(BestConvention convention) noexcept;

struct McDataset {
  std::vector<McItem> items;
  BestConvention convention = BestConvention::included;
};

/// `best_query` is matched against `good_queries` by exact equality; when
/// absent it is inserted at the front of the good list.
McDataset parse_mc(std::string_view text);
McDataset load_mc(const std::filesystem::path& path);

std::vector<QaItem> parse_qa(std::string_view text);
std::vector<QaItem> load_qa(const std::filesystem::path& path);

/// Reads one prediction per line, either a JSON string or {"prediction": "..."}.
std::vector<std::string> load_predictions(const std::filesystem::path& path);

std::vector<FactorItem> parse_factor(std::string_view text);
std::vector<FactorItem> load_factor(const std::filesystem::path& path);

/// Trace file names by (item, candidate key).
///
/// Built from `manifest.jsonl` ({"item", "candidate", "file"} per line) when
/// the directory has one, otherwise from the "item" and "candidate" metadata
/// of every `*.pigtrace` file in it. Candidate keys are "best", "good/k" and
/// "bad/k" with k indexing the dataset's own lists, or "completion/k".
class TraceIndex {
 public:
  static TraceIndex scan(const std::filesystem::path& dir);

  void add(std::size_t item, std::string key, std::filesystem::path file);
  std::optional<std::filesystem::path> find(std::size_t item, const std::string& key) const;
  std::size_t size() const noexcept { return files_.size(); }

 private:
  std::map<std::pair<std::size_t, std::string>, std::filesystem::path> files_;
};

/// The keys under which a trace for `ref` may be filed, most specific first.
std::vector<std::string> trace_keys(const McItem& item, const CandidateRef& ref);

/// Teacher-forced log-probability of the candidate recorded in one scoring
/// trace. `tokens`, when non-empty, must equal the trace's forced tokens.
double score_trace(const std::filesystem::path& file, const TokenSeq& tokens, const PigConfig& base,
                   const LayerChoice& layers, bool per_token_average = false);

/// Scorer over a trace directory for an MC dataset. `items` and `index`
/// are referenced, not copied.
Scorer mc_trace_scorer(const std::vector<McItem>& items, const TraceIndex& index, PigConfig base,
                       LayerChoice layers, bool per_token_average = false);

/// Scorer over a trace directory for a FACTOR dataset. Same lifetime rule.
Scorer factor_trace_scorer(const std::vector<FactorItem>& items, const TraceIndex& index, PigConfig base,
                           LayerChoice layers, bool per_token_average = false);

}  // namespace largepig::eval
