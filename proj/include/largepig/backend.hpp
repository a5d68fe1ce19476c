// SPDX-License-Identifier: Apache-2.0
//
// Model-access boundary. A Session hands out one StepTrace per position and
// must be driven strictly in order: each `next_step()` is followed either by
// `advance()` (free generation) or was itself teacher-forced.
#pragma once

#include "largepig/engine.hpp"
#include "largepig/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace largepig {

struct Capabilities {
  Eigen::Index vocab_size = 0;
  std::vector<LayerIndex> layers;  ///< layer indices carrying logits, ascending
  LayerIndex anchor_layer = 0;
  LayerIndex attention_layer = 0;
};

class Session {
 public:
  virtual ~Session() = default;

  virtual const Capabilities& capabilities() const = 0;
  const TokenSeq& prompt() const noexcept { return prompt_; }
  const SourceSpan& source_span() const noexcept { return span_; }
  const TokenSeq& context() const noexcept { return context_; }
  /// Number of steps produced so far.
  std::size_t step_index() const noexcept { return step_; }

  /// Returns the trace for the current position. With `forced`, the token is
  /// appended to the context immediately (teacher forcing); without it, the
  /// caller must `advance()` with its chosen token before the next request.
  StepTrace next_step(std::optional<TokenId> forced = std::nullopt);

  /// Appends the token chosen for the step just returned.
  void advance(TokenId token);

 protected:
  Session(TokenSeq prompt, SourceSpan span);

  struct Payload {
    std::map<LayerIndex, LogitsVector> layer_logits;
    WeightVector attention;
  };
  /// Produces the raw payload for step `step` given the current context.
  virtual Payload produce(std::size_t step, const TokenSeq& context,
                          std::optional<TokenId> forced) = 0;

 private:
  TokenSeq prompt_;
  SourceSpan span_;
  TokenSeq context_;
  std::size_t step_ = 0;
  bool awaiting_advance_ = false;
};

/// How a config picks its layers; resolved per backend by `bind_config`.
struct LayerChoice {
  std::string selector = "last16";
  /// Defaults to the backend's anchor.
  std::optional<LayerIndex> anchor;
  /// Must match the layer the backend takes attention from when given.
  std::optional<LayerIndex> attention;
};

/// Fills the layer fields of `base` for a backend with capabilities `caps`.
/// Throws invalid-argument when the choice cannot be served.
PigConfig bind_config(PigConfig base, const LayerChoice& choice, const Capabilities& caps);

}  // namespace largepig
