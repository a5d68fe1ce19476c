// SPDX-License-Identifier: Apache-2.0
#include "largepig/backend.hpp"

#include "largepig/error.hpp"

#include <algorithm>
#include <string>
#include <utility>

namespace largepig {

Session::Session(TokenSeq prompt, SourceSpan span)
    : prompt_(std::move(prompt)), span_(span), context_(prompt_) {
  require(span_.start < span_.end && span_.end <= prompt_.size(), Errc::invalid_argument,
          "source span [" + std::to_string(span_.start) + ", " + std::to_string(span_.end) +
              ") must be non-empty and inside the " + std::to_string(prompt_.size()) +
              "-token prompt");
}

StepTrace Session::next_step(std::optional<TokenId> forced) {
  if (awaiting_advance_) {
    fail(Errc::out_of_sequence, "step " + std::to_string(step_ + 1) +
                                    " requested before step " + std::to_string(step_) +
                                    " was advanced");
  }
  const auto vocab = capabilities().vocab_size;
  if (forced && (*forced < 0 || *forced >= vocab)) {
    fail(Errc::invalid_argument, "forced token " + std::to_string(*forced) +
                                     " outside vocabulary of " + std::to_string(vocab));
  }
  Payload payload = produce(step_, context_, forced);

  StepTrace trace;
  trace.context_tokens = context_;
  trace.source_span = span_;
  trace.layer_logits = std::move(payload.layer_logits);
  trace.attention = std::move(payload.attention);

  if (forced) {
    context_.push_back(*forced);
    ++step_;
  } else {
    awaiting_advance_ = true;
  }
  return trace;
}

void Session::advance(TokenId token) {
  require(awaiting_advance_, Errc::out_of_sequence, "advance() without a pending step");
  const auto vocab = capabilities().vocab_size;
  require(token >= 0 && token < vocab, Errc::invalid_argument,
          "token " + std::to_string(token) + " outside vocabulary of " + std::to_string(vocab));
  context_.push_back(token);
  ++step_;
  awaiting_advance_ = false;
}

PigConfig bind_config(PigConfig base, const LayerChoice& choice, const Capabilities& caps) {
  const LayerIndex anchor = choice.anchor.value_or(caps.anchor_layer);
  require(std::find(caps.layers.begin(), caps.layers.end(), anchor) != caps.layers.end(),
          Errc::invalid_argument, "anchor layer " + std::to_string(anchor) + " is not provided by the backend");
  if (choice.attention && *choice.attention != caps.attention_layer) {
    fail(Errc::invalid_argument, "attention layer " + std::to_string(*choice.attention) +
                                     " requested but the backend supplies layer " +
                                     std::to_string(caps.attention_layer));
  }
  base.anchor_layer = anchor;
  base.attention_layer = caps.attention_layer;
  base.layer_set = resolve_layer_selector(choice.selector, caps.layers, anchor);
  validate(base);
  return base;
}

}  // namespace largepig
