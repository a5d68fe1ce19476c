// SPDX-License-Identifier: Apache-2.0
#include "largepig/eval.hpp"

#include "largepig/error.hpp"
#include "largepig/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace largepig::eval {

std::string CandidateRef::key() const {
  switch (role) {
    case CandidateRole::good: return "good/" + std::to_string(index);
    case CandidateRole::bad: return "bad/" + std::to_string(index);
    case CandidateRole::completion: return "completion/" + std::to_string(index);
  }
  return "?";
}

namespace {

double log_sum_exp(std::span<const double> values) {
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

}  // namespace

McItemResult score_mc_item(double best_log_prob, std::span<const double> good_log_probs,
                           std::span<const double> bad_log_probs) {
  require(!bad_log_probs.empty(), Errc::invalid_argument, "MC item without bad queries");
  require(!good_log_probs.empty(), Errc::invalid_argument, "MC item without good queries");
  McItemResult r;
  r.best_log_prob = best_log_prob;
  r.good_log_probs.assign(good_log_probs.begin(), good_log_probs.end());
  r.bad_log_probs.assign(bad_log_probs.begin(), bad_log_probs.end());

  const double top_bad = *std::max_element(bad_log_probs.begin(), bad_log_probs.end());
  r.mc1 = best_log_prob > top_bad;
  r.good_wins = static_cast<std::size_t>(
      std::count_if(good_log_probs.begin(), good_log_probs.end(), [&](double g) { return g > top_bad; }));

  // good mass / (good mass + bad mass), evaluated in the log domain.
  const double log_good = log_sum_exp(good_log_probs);
  const double log_bad = log_sum_exp(bad_log_probs);
  if (log_good == -std::numeric_limits<double>::infinity()) {
    r.mc2 = 0.0;
  } else if (log_bad == -std::numeric_limits<double>::infinity()) {
    r.mc2 = 1.0;
  } else {
    r.mc2 = 1.0 / (1.0 + std::exp(log_bad - log_good));
  }
  return r;
}

McResult reduce_mc(std::vector<McItemResult> items, Mc3Convention convention) {
  require(!items.empty(), Errc::invalid_argument, "MC metrics over an empty dataset");
  McResult out;
  out.convention = convention;
  std::size_t mc1_hits = 0;
  std::size_t wins = 0;
  std::size_t goods = 0;
  double mc2_sum = 0.0;
  double mc3_item_sum = 0.0;
  for (const auto& item : items) {
    mc1_hits += item.mc1 ? 1 : 0;
    mc2_sum += item.mc2;
    wins += item.good_wins;
    goods += item.good_log_probs.size();
    mc3_item_sum += static_cast<double>(item.good_wins) / static_cast<double>(item.good_log_probs.size());
  }
  const auto n = static_cast<double>(items.size());
  out.mc1 = static_cast<double>(mc1_hits) / n;
  out.mc2 = mc2_sum / n;
  out.mc3 = convention == Mc3Convention::multiset ? static_cast<double>(wins) / static_cast<double>(goods)
                                                  : mc3_item_sum / n;
  out.items = std::move(items);
  return out;
}

McResult mc_metrics(std::span<const McItem> items, const Scorer& scorer, Mc3Convention convention) {
  require(!items.empty(), Errc::invalid_argument, "MC metrics over an empty dataset");
  std::vector<McItemResult> rows;
  rows.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const McItem& item = items[i];
    require(item.best < item.good.size(), Errc::invalid_argument,
            "MC item " + std::to_string(i) + ": best query index outside the good list");
    require(!item.bad.empty(), Errc::invalid_argument, "MC item " + std::to_string(i) + " has no bad queries");
    std::vector<double> good(item.good.size());
    std::vector<double> bad(item.bad.size());
    for (std::size_t k = 0; k < good.size(); ++k) good[k] = scorer({i, CandidateRole::good, k});
    for (std::size_t k = 0; k < bad.size(); ++k) bad[k] = scorer({i, CandidateRole::bad, k});
    rows.push_back(score_mc_item(good[item.best], good, bad));
  }
  return reduce_mc(std::move(rows), convention);
}

std::string normalize_answer(std::string_view text, F1Options options) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(u)));
  }
  std::istringstream words(cleaned);
  std::string word;
  std::string out;
  while (words >> word) {
    if (options.strip_articles && (word == "a" || word == "an" || word == "the")) continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

}  // namespace

double token_f1(std::string_view prediction, std::string_view gold, F1Options options) {
  const auto pred_tokens = split_words(normalize_answer(prediction, options));
  const auto gold_tokens = split_words(normalize_answer(gold, options));
  if (pred_tokens.empty() || gold_tokens.empty()) {
    return pred_tokens.empty() && gold_tokens.empty() ? 1.0 : 0.0;
  }
  std::map<std::string, std::size_t> gold_counts;
  for (const auto& t : gold_tokens) ++gold_counts[t];
  std::size_t common = 0;
  for (const auto& t : pred_tokens) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred_tokens.size());
  const double recall = static_cast<double>(common) / static_cast<double>(gold_tokens.size());
  return 2.0 * precision * recall / (precision + recall);
}

double squad_f1(std::string_view prediction, std::span<const std::string> golds, F1Options options) {
  double best = 0.0;
  for (const auto& gold : golds) best = std::max(best, token_f1(prediction, gold, options));
  return best;
}

LengthClass classify_context(std::string_view context) {
  std::istringstream in{std::string(context)};
  std::size_t words = 0;
  std::string word;
  while (in >> word) ++words;
  return words > kLongContextWords ? LengthClass::long_context : LengthClass::short_context;
}

F1Result f1_metrics(std::span<const QaItem> items, F1Options options) {
  require(!items.empty(), Errc::invalid_argument, "F1 over an empty dataset");
  F1Result r;
  double total = 0.0;
  double short_total = 0.0;
  double long_total = 0.0;
  for (const auto& item : items) {
    const double f1 = squad_f1(item.prediction, item.answers, options);
    r.per_item.push_back(f1);
    total += f1;
    if (item.length_class == LengthClass::long_context) {
      long_total += f1;
      ++r.long_count;
    } else {
      short_total += f1;
      ++r.short_count;
    }
  }
  r.f1 = total / static_cast<double>(items.size());
  r.f1_short = r.short_count ? short_total / static_cast<double>(r.short_count) : 0.0;
  r.f1_long = r.long_count ? long_total / static_cast<double>(r.long_count) : 0.0;
  return r;
}

FactorResult factor_accuracy(std::span<const FactorItem> items, const Scorer& scorer) {
  require(!items.empty(), Errc::invalid_argument, "FACTOR accuracy over an empty dataset");
  FactorResult r;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const FactorItem& item = items[i];
    require(item.completions.size() >= 2 && item.correct < item.completions.size(), Errc::invalid_argument,
            "FACTOR item " + std::to_string(i) + " needs a correct completion and at least one distractor");
    std::vector<double> lps(item.completions.size());
    for (std::size_t k = 0; k < lps.size(); ++k) lps[k] = scorer({i, CandidateRole::completion, k});
    bool wins = true;
    for (std::size_t k = 0; k < lps.size(); ++k) {
      if (k != item.correct && !(lps[item.correct] > lps[k])) wins = false;
    }
    hits += wins ? 1 : 0;
    r.per_item.push_back(wins);
    r.log_probs.push_back(std::move(lps));
  }
  r.accuracy = static_cast<double>(hits) / static_cast<double>(items.size());
  return r;
}

std::vector<std::size_t> assign_folds(std::size_t count, std::size_t folds, std::uint64_t seed) {
  require(folds >= 1, Errc::invalid_argument, "fold count must be at least 1");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = count; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<std::size_t> fold_of(count);
  for (std::size_t rank = 0; rank < count; ++rank) fold_of[order[rank]] = rank % folds;
  return fold_of;
}

CrossValidation cross_validate(const std::vector<std::vector<double>>& item_scores,
                               std::span<const std::size_t> folds, std::size_t fold_count) {
  require(!item_scores.empty(), Errc::invalid_argument, "cross-validation over an empty grid");
  const std::size_t n = folds.size();
  for (const auto& row : item_scores) {
    require(row.size() == n, Errc::invalid_argument, "cross-validation: score rows disagree with folds");
  }
  require(n > 0, Errc::invalid_argument, "cross-validation over no items");
  CrossValidation cv;
  double held_out = 0.0;
  for (std::size_t f = 0; f < fold_count; ++f) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < item_scores.size(); ++g) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (fold_count > 1 && folds[i] == f) continue;
        sum += item_scores[g][i];
        ++count;
      }
      const double mean = count ? sum / static_cast<double>(count) : 0.0;
      if (mean > best_score) {
        best_score = mean;
        best = g;
      }
    }
    cv.chosen.push_back(best);
    for (std::size_t i = 0; i < n; ++i) {
      if (folds[i] == f) held_out += item_scores[best][i];
    }
  }
  cv.held_out_score = held_out / static_cast<double>(n);
  return cv;
}

}  // namespace largepig::eval
