// SPDX-License-Identifier: Apache-2.0
//
// The pointer-generator step: mixes a pointer distribution built from
// attention over the source span with the model's vocabulary distribution,
// weighted by a copy probability derived from how far the candidate layers'
// early-exit distributions are from the anchor layer's.
#pragma once

#include "largepig/types.hpp"

#include <Eigen/Core>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace largepig {

/// Half-open range [start, end) of prompt positions holding the source document.
struct SourceSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end > start ? end - start : 0; }
  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

/// Everything the engine needs for one decoding step.
struct StepTrace {
  TokenSeq context_tokens;
  SourceSpan source_span;
  std::map<LayerIndex, LogitsVector> layer_logits;
  /// Head-averaged attention from the last position, one weight per context token.
  WeightVector attention;

  Eigen::Index vocab_size() const noexcept {
    return layer_logits.empty() ? 0 : layer_logits.begin()->second.size();
  }
};

enum class Aggregator { mean, max, min };

std::string_view to_string(Aggregator agg) noexcept;
Aggregator parse_aggregator(std::string_view text);

using TokenFilter = std::unordered_set<TokenId>;

struct PigConfig {
  double alpha = 500.0;
  double clip_max = 0.5;
  Aggregator aggregator = Aggregator::max;
  std::vector<LayerIndex> layer_set;
  LayerIndex anchor_layer = 0;
  LayerIndex attention_layer = 0;
  TokenFilter token_filter;
  /// Applied to the anchor logits when forming the vocabulary distribution.
  /// The layer distributions compared for the copy probability always use 1.
  double temperature = 1.0;
  unsigned long long seed = 0;
};

/// Throws invalid-argument when the config breaks its invariants.
/// `alpha == 0` is accepted and disables copying.
void validate(const PigConfig& config);

/// Expands a layer selector against the layers a trace provides.
///
/// Accepted forms: an explicit comma list ("20,22,24"), "lastK",
/// "lastK:even" and "lastK:odd". "lastK" picks the K highest available
/// layers below the anchor; the parity suffix then keeps only even or odd
/// layer indices. The anchor is never part of the result.
std::vector<LayerIndex> resolve_layer_selector(std::string_view selector,
                                               std::span<const LayerIndex> available,
                                               LayerIndex anchor);

/// Element-wise mean of per-head attention rows.
WeightVector aggregate_heads(std::span<const WeightVector> per_head_rows);

/// Pointer distribution in vocabulary space: span attention, filtered and
/// renormalized, accumulated onto the span's token ids.
/// Throws degenerate-span when no filtered span position carries mass.
ProbVector pointer_distribution(const StepTrace& trace, const TokenFilter& filter = {});

/// Copy probability for already-computed layer divergences, `min(alpha * O(d), clip_max)`.
double copy_probability_from_divergences(std::span<const double> divergences,
                                         const PigConfig& config);

/// Copy probability from the anchor distribution and the candidate-layer
/// distributions, using Jensen-Shannon divergence.
double copy_probability(const ProbVector& anchor, std::span<const ProbVector> candidates,
                        const PigConfig& config);

/// `p_cp * source + (1 - p_cp) * vocab`.
ProbVector mix_distributions(double p_cp, const ProbVector& source, const ProbVector& vocab);

struct StepDiagnostics {
  double p_cp = 0.0;
  /// O over the layer divergences, before scaling and clipping.
  double aggregated_divergence = 0.0;
  std::vector<std::pair<LayerIndex, double>> layer_divergence;
  /// Pointer mass per distinct span token (empty for a degenerate span).
  std::vector<std::pair<TokenId, double>> span_mass;
  bool degenerate_span = false;
};

struct StepOutput {
  ProbVector distribution;
  /// Anchor softmax at the configured temperature.
  ProbVector vocab;
  StepDiagnostics diagnostics;
};

/// Throws invalid-argument when the trace is inconsistent with `config`.
void validate(const StepTrace& trace, const PigConfig& config);

/// Runs one full step. A degenerate span does not fail: the copy probability
/// is forced to 0 and `diagnostics.degenerate_span` is set.
StepOutput decode_step(const StepTrace& trace, const PigConfig& config);

}  // namespace largepig
