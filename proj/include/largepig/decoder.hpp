// SPDX-License-Identifier: Apache-2.0
//
// Generation and teacher-forced scoring over the mixed distribution.
#pragma once

#include "largepig/backend.hpp"
#include "largepig/engine.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <unordered_set>

namespace largepig {

enum class SamplingMode { greedy, temperature };

std::string_view to_string(SamplingMode mode) noexcept;
SamplingMode parse_sampling_mode(std::string_view text);

struct SamplingParams {
  SamplingMode mode = SamplingMode::temperature;
  /// Replaces the config temperature in temperature mode.
  double temperature = 0.8;
  std::size_t max_new_tokens = 256;
  std::unordered_set<TokenId> stop_tokens;
  std::uint64_t seed = 0;
};

enum class StopReason { stop_token, length, end_of_trace };

std::string_view to_string(StopReason reason) noexcept;

struct GenerationResult {
  TokenSeq tokens;
  std::vector<double> p_cp;
  /// Mixed-distribution probability of each emitted token.
  std::vector<double> chosen_prob;
  std::vector<bool> degenerate_span;
  StopReason stop_reason = StopReason::length;
};

/// Highest-probability token; the lowest id wins ties.
TokenId argmax_token(const ProbVector& distribution);

/// Inverse-CDF draw in token-id order for a uniform variate `u` in [0, 1).
TokenId sample_token(const ProbVector& distribution, double u);

/// Free generation: next_step, decode_step, pick, advance, until a stop
/// token, `max_new_tokens`, or the backend runs out of steps. A stop token
/// is kept as the last emitted token.
GenerationResult generate(Session& session, const PigConfig& config, const SamplingParams& params);

struct SequenceScore {
  double total = 0.0;
  std::vector<double> step_log_probs;
  std::vector<double> p_cp;
};

/// Teacher-forces `candidate` and returns the per-step log-probabilities
/// under the mixed distribution at `config.temperature`.
SequenceScore score_candidate(Session& session, std::span<const TokenId> candidate,
                              const PigConfig& config);

/// Sum of log-probabilities (or their mean with `per_token_average`).
/// An empty candidate scores 0.
double score_sequence(Session& session, std::span<const TokenId> candidate, const PigConfig& config,
                      bool per_token_average = false);

}  // namespace largepig
