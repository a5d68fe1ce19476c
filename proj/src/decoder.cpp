// SPDX-License-Identifier: Apache-2.0
#include "largepig/decoder.hpp"

#include "largepig/error.hpp"
#include "largepig/random.hpp"

#include <cmath>
#include <string>

namespace largepig {

std::string_view to_string(SamplingMode mode) noexcept {
  return mode == SamplingMode::greedy ? "greedy" : "temperature";
}

SamplingMode parse_sampling_mode(std::string_view text) {
  if (text == "greedy") return SamplingMode::greedy;
  if (text == "temperature" || text == "sample") return SamplingMode::temperature;
  fail(Errc::invalid_argument, "unknown sampling mode '" + std::string(text) + "' (greedy|temperature)");
}

std::string_view to_string(StopReason reason) noexcept {
  switch (reason) {
    case StopReason::stop_token: return "stop-token";
    case StopReason::length: return "length";
    case StopReason::end_of_trace: return "end-of-trace";
  }
  return "?";
}

TokenId argmax_token(const ProbVector& distribution) {
  require(distribution.size() > 0, Errc::invalid_argument, "argmax of an empty distribution");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < distribution.size(); ++i) {
    if (distribution[i] > distribution[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

TokenId sample_token(const ProbVector& distribution, double u) {
  require(distribution.size() > 0, Errc::invalid_argument, "sampling from an empty distribution");
  require(u >= 0.0 && u < 1.0, Errc::invalid_argument, "uniform variate outside [0, 1)");
  const double target = u * distribution.sum();
  double cumulative = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < distribution.size(); ++i) {
    if (distribution[i] <= 0.0) continue;
    cumulative += distribution[i];
    last_positive = i;
    if (target < cumulative) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_positive);
}

namespace {

[[noreturn]] void rethrow_at_step(const Error& e, std::size_t step) {
  throw Error(e.code(), "step " + std::to_string(step) + ": " + e.what());
}

}  // namespace

GenerationResult generate(Session& session, const PigConfig& config, const SamplingParams& params) {
  require(params.max_new_tokens >= 1, Errc::invalid_argument, "max_new_tokens must be at least 1");
  PigConfig effective = config;
  if (params.mode == SamplingMode::temperature) effective.temperature = params.temperature;
  validate(effective);

  Rng rng(params.seed);
  GenerationResult result;
  for (std::size_t step = 0; step < params.max_new_tokens; ++step) {
    StepTrace trace;
    try {
      trace = session.next_step();
    } catch (const Error& e) {
      if (e.code() == Errc::end_of_trace) {
        result.stop_reason = StopReason::end_of_trace;
        return result;
      }
      rethrow_at_step(e, step);
    }
    StepOutput out;
    try {
      out = decode_step(trace, effective);
    } catch (const Error& e) {
      rethrow_at_step(e, step);
    }
    const TokenId token = params.mode == SamplingMode::greedy
                              ? argmax_token(out.distribution)
                              : sample_token(out.distribution, rng.uniform());
    session.advance(token);
    result.tokens.push_back(token);
    result.p_cp.push_back(out.diagnostics.p_cp);
    result.chosen_prob.push_back(out.distribution[token]);
    result.degenerate_span.push_back(out.diagnostics.degenerate_span);
    if (params.stop_tokens.contains(token)) {
      result.stop_reason = StopReason::stop_token;
      return result;
    }
  }
  result.stop_reason = StopReason::length;
  return result;
}

SequenceScore score_candidate(Session& session, std::span<const TokenId> candidate,
                              const PigConfig& config) {
  validate(config);
  const auto vocab = session.capabilities().vocab_size;
  for (TokenId token : candidate) {
    require(token >= 0 && token < vocab, Errc::invalid_argument,
            "candidate token " + std::to_string(token) + " outside vocabulary of " + std::to_string(vocab));
  }
  SequenceScore score;
  for (std::size_t step = 0; step < candidate.size(); ++step) {
    const TokenId token = candidate[step];
    StepOutput out;
    try {
      out = decode_step(session.next_step(token), config);
    } catch (const Error& e) {
      rethrow_at_step(e, step);
    }
    const double lp = std::log(out.distribution[token]);
    score.step_log_probs.push_back(lp);
    score.p_cp.push_back(out.diagnostics.p_cp);
    score.total += lp;
  }
  return score;
}

double score_sequence(Session& session, std::span<const TokenId> candidate, const PigConfig& config,
                      bool per_token_average) {
  if (candidate.empty()) return 0.0;
  const SequenceScore score = score_candidate(session, candidate, config);
  return per_token_average ? score.total / static_cast<double>(candidate.size()) : score.total;
}

}  // namespace largepig
