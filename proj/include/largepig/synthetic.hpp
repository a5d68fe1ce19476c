// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic backend. "Function" steps give every layer the same
// logits (the early-exit distributions have settled); "content" steps push
// each candidate layer at least `content_divergence_floor` away from the
// anchor in Jensen-Shannon divergence. All emitted values are exactly
// representable in f32 so a recorded synthetic trace replays bit-for-bit.
#pragma once

#include "largepig/backend.hpp"
#include "largepig/trace.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>

namespace largepig {

enum class StepKind { function, content };

/// Parses "f,c,content,function" style plans.
std::vector<StepKind> parse_step_plan(std::string_view text);
std::string format_step_plan(const std::vector<StepKind>& plan);

struct SyntheticSpec {
  std::uint64_t seed = 0;
  Eigen::Index vocab_size = 16;
  int num_layers = 8;  ///< layers are numbered 1..num_layers; the last is the anchor
  std::vector<StepKind> plan;
  double content_divergence_floor = 0.05;
  double logit_scale = 2.0;
  /// Source tokens; drawn at random (4 of them) when empty.
  TokenSeq span_tokens;
  /// Random prompt tokens placed before the span.
  std::size_t prefix_length = 2;
  /// Fraction of each attention row that lands on the span.
  double span_attention_share = 0.5;
};

class SyntheticSession final : public Session {
 public:
  /// Throws invalid-argument for a zero vocabulary, zero layers, or an
  /// unreachable divergence floor.
  explicit SyntheticSession(SyntheticSpec spec);

  const Capabilities& capabilities() const override { return caps_; }
  const SyntheticSpec& spec() const noexcept { return spec_; }

 private:
  struct Validated {};
  SyntheticSession(SyntheticSpec spec, Validated);

  Payload produce(std::size_t step, const TokenSeq& context, std::optional<TokenId> forced) override;

  SyntheticSpec spec_;
  Capabilities caps_;
};

/// Convenience wrapper matching the other backends' factory style.
std::unique_ptr<Session> synth_backend(const SyntheticSpec& spec);

/// Runs `session` through `steps` greedy steps (argmax of the anchor logits,
/// lowest id on ties) and captures them as a trace.
TraceFile record_greedy(Session& session, std::size_t steps, nlohmann::json meta);

/// Teacher-forces `tokens` through `session` and captures a scoring trace.
TraceFile record_forced(Session& session, std::span<const TokenId> tokens, nlohmann::json meta);

}  // namespace largepig
