// SPDX-License-Identifier: Apache-2.0
#include "largepig/synthetic.hpp"

#include "largepig/prob.hpp"
#include "largepig/random.hpp"

#include <algorithm>
#include <cmath>

namespace largepig {

std::vector<StepKind> parse_step_plan(std::string_view text) {
  std::vector<StepKind> plan;
  std::size_t pos = 0;
  while (pos <= text.size() && !text.empty()) {
    const auto comma = text.find(',', pos);
    const auto piece = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    if (piece == "f" || piece == "function") {
      plan.push_back(StepKind::function);
    } else if (piece == "c" || piece == "content") {
      plan.push_back(StepKind::content);
    } else {
      fail(Errc::invalid_argument, "step plan entry '" + std::string(piece) + "' is not f|c");
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return plan;
}

std::string format_step_plan(const std::vector<StepKind>& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (i) out += ',';
    out += plan[i] == StepKind::function ? 'f' : 'c';
  }
  return out;
}

namespace {

constexpr std::uint64_t kPromptStream = 0xFFFF'FFFF'FFFF'FFFFull;

SyntheticSpec checked(SyntheticSpec spec) {
  require(spec.vocab_size > 0, Errc::invalid_argument, "synthetic backend: vocabulary must be positive");
  require(spec.num_layers > 0, Errc::invalid_argument, "synthetic backend: need at least one layer");
  require(spec.logit_scale > 0.0 && std::isfinite(spec.logit_scale), Errc::invalid_argument,
          "synthetic backend: logit scale must be positive");
  require(spec.content_divergence_floor >= 0.0 && spec.content_divergence_floor < std::log(2.0),
          Errc::invalid_argument, "synthetic backend: divergence floor must lie in [0, ln 2)");
  require(spec.span_attention_share > 0.0 && spec.span_attention_share <= 1.0, Errc::invalid_argument,
          "synthetic backend: span attention share must lie in (0, 1]");
  Rng rng(derive_seed(spec.seed, kPromptStream));
  if (spec.span_tokens.empty()) {
    for (int i = 0; i < 4; ++i) {
      spec.span_tokens.push_back(static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(spec.vocab_size))));
    }
  }
  for (TokenId t : spec.span_tokens) {
    require(t >= 0 && t < spec.vocab_size, Errc::invalid_argument,
            "synthetic backend: span token " + std::to_string(t) + " outside vocabulary");
  }
  return spec;
}

TokenSeq build_prompt(const SyntheticSpec& spec) {
  Rng rng(derive_seed(spec.seed, kPromptStream - 1));
  TokenSeq prompt;
  for (std::size_t i = 0; i < spec.prefix_length; ++i) {
    prompt.push_back(static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(spec.vocab_size))));
  }
  prompt.insert(prompt.end(), spec.span_tokens.begin(), spec.span_tokens.end());
  return prompt;
}

LogitsVector gaussian_logits(Rng& rng, Eigen::Index n, double scale) {
  LogitsVector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = static_cast<float>(scale * rng.normal());
  return out;
}

}  // namespace

SyntheticSession::SyntheticSession(SyntheticSpec spec)
    : SyntheticSession(checked(std::move(spec)), Validated{}) {}

SyntheticSession::SyntheticSession(SyntheticSpec spec, Validated)
    : Session(build_prompt(spec),
              SourceSpan{spec.prefix_length, spec.prefix_length + spec.span_tokens.size()}),
      spec_(std::move(spec)) {
  caps_.vocab_size = spec_.vocab_size;
  for (int l = 1; l <= spec_.num_layers; ++l) caps_.layers.push_back(l);
  caps_.anchor_layer = spec_.num_layers;
  caps_.attention_layer = spec_.num_layers;
}

Session::Payload SyntheticSession::produce(std::size_t step, const TokenSeq& context,
                                           std::optional<TokenId> /*forced*/) {
  if (step >= spec_.plan.size()) {
    fail(Errc::end_of_trace, "synthetic plan has only " + std::to_string(spec_.plan.size()) + " steps");
  }
  Rng rng(derive_seed(spec_.seed, step));
  const Eigen::Index vocab = spec_.vocab_size;

  Payload payload;
  const LogitsVector anchor = gaussian_logits(rng, vocab, spec_.logit_scale);
  payload.layer_logits.emplace(caps_.anchor_layer, anchor);

  if (spec_.plan[step] == StepKind::function) {
    for (int l = 1; l < spec_.num_layers; ++l) payload.layer_logits.emplace(l, anchor);
  } else {
    const ProbVector anchor_probs = softmax(anchor);
    for (int l = 1; l < spec_.num_layers; ++l) {
      // Leaning against the anchor keeps the limit of large pushes away from
      // the anchor's own peak.
      const Vector<double> direction =
          gaussian_logits(rng, vocab, 1.0).cast<double>() - anchor.cast<double>() / spec_.logit_scale;
      double scale = spec_.logit_scale;
      LogitsVector candidate = anchor + (scale * direction).cast<float>();
      int doublings = 0;
      while (jsd(anchor_probs, softmax(candidate)) < spec_.content_divergence_floor) {
        require(++doublings <= 40, Errc::invalid_argument,
                "synthetic backend: divergence floor " + std::to_string(spec_.content_divergence_floor) +
                    " unreachable at vocabulary " + std::to_string(vocab));
        scale *= 2.0;
        candidate = anchor + (scale * direction).cast<float>();
      }
      payload.layer_logits.emplace(l, std::move(candidate));
    }
  }

  // Attention: random positive weights, a fixed share of the mass on the span.
  const auto length = static_cast<Eigen::Index>(context.size());
  WeightVector weights(length);
  for (Eigen::Index i = 0; i < length; ++i) weights[i] = 0.05 + rng.uniform();
  const SourceSpan span = source_span();
  const double span_total = weights.segment(span.start, span.size()).sum();
  const double rest_total = weights.sum() - span_total;
  if (rest_total > 0.0 && spec_.span_attention_share < 1.0) {
    weights.segment(span.start, span.size()) *= spec_.span_attention_share / span_total;
    const double rest_scale = (1.0 - spec_.span_attention_share) / rest_total;
    for (Eigen::Index i = 0; i < length; ++i) {
      if (i < static_cast<Eigen::Index>(span.start) || i >= static_cast<Eigen::Index>(span.end)) {
        weights[i] *= rest_scale;
      }
    }
  } else {
    weights /= weights.sum();
  }
  payload.attention = weights.cast<float>().cast<double>();
  return payload;
}

std::unique_ptr<Session> synth_backend(const SyntheticSpec& spec) {
  return std::make_unique<SyntheticSession>(spec);
}

TraceFile record_greedy(Session& session, std::size_t steps, nlohmann::json meta) {
  TraceFile trace;
  trace.header = make_trace_header(session, std::move(meta));
  for (std::size_t i = 0; i < steps; ++i) {
    const StepTrace step = session.next_step();
    const LogitsVector& anchor = step.layer_logits.at(session.capabilities().anchor_layer);
    Eigen::Index best = 0;
    anchor.maxCoeff(&best);  // first maximal index
    session.advance(static_cast<TokenId>(best));
    trace.steps.push_back(make_trace_step(step));
  }
  return trace;
}

TraceFile record_forced(Session& session, std::span<const TokenId> tokens, nlohmann::json meta) {
  TraceFile trace;
  trace.header = make_trace_header(session, std::move(meta));
  for (TokenId token : tokens) trace.steps.push_back(make_trace_step(session.next_step(token), token));
  return trace;
}

}  // namespace largepig
