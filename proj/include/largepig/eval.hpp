// SPDX-License-Identifier: Apache-2.0
//
// Truthfulness and copy metrics: MC1/MC2/MC3 over scored query candidates,
// SQuAD-style token F1, and completion-ranking accuracy.
#pragma once

#include "largepig/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace largepig::eval {

/// A candidate continuation; raw text, token ids, or both.
struct Candidate {
  std::string text;
  TokenSeq tokens;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// One multiple-choice record. `good` always contains the best query, at
/// index `best`.
struct McItem {
  std::string content;
  TokenSeq content_tokens;
  std::vector<Candidate> good;
  std::size_t best = 0;
  std::vector<Candidate> bad;
  /// Whether the source record already listed the best query among its good ones.
  bool best_listed_in_good = false;
};

enum class CandidateRole { good, bad, completion };

/// Identifies one candidate of one item; `key()` is the name used in trace
/// metadata ("good/0", "bad/2", "completion/1").
struct CandidateRef {
  std::size_t item = 0;
  CandidateRole role = CandidateRole::good;
  std::size_t index = 0;

  std::string key() const;
};

using Scorer = std::function<double(const CandidateRef&)>;

enum class Mc3Convention {
  multiset,  ///< wins over all good queries in the dataset / number of good queries
  per_item,  ///< mean over items of the per-item win fraction
};

struct McItemResult {
  double best_log_prob = 0.0;
  std::vector<double> good_log_probs;
  std::vector<double> bad_log_probs;
  bool mc1 = false;
  double mc2 = 0.0;
  std::size_t good_wins = 0;  ///< good queries strictly above every bad one
};

struct McResult {
  double mc1 = 0.0;
  double mc2 = 0.0;
  double mc3 = 0.0;
  Mc3Convention convention = Mc3Convention::multiset;
  std::vector<McItemResult> items;
};

/// Per-item MC figures from log-probabilities. Ties lose.
McItemResult score_mc_item(double best_log_prob, std::span<const double> good_log_probs,
                           std::span<const double> bad_log_probs);

/// Dataset-level reduction of per-item results. Throws invalid-argument when empty.
McResult reduce_mc(std::vector<McItemResult> items, Mc3Convention convention = Mc3Convention::multiset);

/// Scores every candidate and reduces. Throws invalid-argument on an empty
/// dataset or an item without bad queries.
McResult mc_metrics(std::span<const McItem> items, const Scorer& scorer,
                    Mc3Convention convention = Mc3Convention::multiset);

struct F1Options {
  bool strip_articles = true;
};

/// Lowercase, drop ASCII punctuation, optionally drop a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text, F1Options options = {});

/// Bag-of-tokens F1 between one prediction and one gold answer.
double token_f1(std::string_view prediction, std::string_view gold, F1Options options = {});

/// Best token F1 over the gold answers. An empty gold list scores 0.
double squad_f1(std::string_view prediction, std::span<const std::string> golds, F1Options options = {});

enum class LengthClass { short_context, long_context };

inline constexpr std::size_t kLongContextWords = 200;

/// Contexts with more than 200 whitespace-separated words are long.
LengthClass classify_context(std::string_view context);

struct QaItem {
  std::string context;
  std::string question;
  std::vector<std::string> answers;
  std::string prediction;
  LengthClass length_class = LengthClass::short_context;
};

struct F1Result {
  double f1 = 0.0;
  double f1_short = 0.0;
  double f1_long = 0.0;
  std::size_t short_count = 0;
  std::size_t long_count = 0;
  std::vector<double> per_item;
};

F1Result f1_metrics(std::span<const QaItem> items, F1Options options = {});

struct FactorItem {
  std::string prefix;
  TokenSeq prefix_tokens;
  std::vector<Candidate> completions;
  std::size_t correct = 0;
};

struct FactorResult {
  double accuracy = 0.0;
  std::vector<bool> per_item;
  std::vector<std::vector<double>> log_probs;
};

/// Fraction of items whose correct completion strictly outscores every
/// distractor. Throws invalid-argument on an empty dataset.
FactorResult factor_accuracy(std::span<const FactorItem> items, const Scorer& scorer);

/// Deterministic fold assignment: item i goes to fold `result[i]`.
std::vector<std::size_t> assign_folds(std::size_t count, std::size_t folds, std::uint64_t seed);

/// K-fold selection of a grid value: for each fold the value with the best
/// training score is applied to that fold's held-out items.
///
/// `item_scores[g][i]` is item i's contribution under grid value g; scores
/// are averaged, larger is better, ties go to the earlier grid value.
struct CrossValidation {
  std::vector<std::size_t> chosen;  ///< selected grid index per fold
  double held_out_score = 0.0;      ///< mean over all held-out items
};

CrossValidation cross_validate(const std::vector<std::vector<double>>& item_scores,
                               std::span<const std::size_t> folds, std::size_t fold_count);

}  // namespace largepig::eval
