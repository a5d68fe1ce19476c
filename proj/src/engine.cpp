// SPDX-License-Identifier: Apache-2.0
#include "largepig/engine.hpp"

#include "largepig/divergence.hpp"
#include "largepig/error.hpp"
#include "largepig/prob.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>

namespace largepig {

std::string_view to_string(Aggregator agg) noexcept {
  switch (agg) {
    case Aggregator::mean: return "mean";
    case Aggregator::max: return "max";
    case Aggregator::min: return "min";
  }
  return "?";
}

Aggregator parse_aggregator(std::string_view text) {
  if (text == "mean" || text == "avg") return Aggregator::mean;
  if (text == "max") return Aggregator::max;
  if (text == "min") return Aggregator::min;
  fail(Errc::invalid_argument, "unknown aggregator '" + std::string(text) + "' (mean|max|min)");
}

void validate(const PigConfig& config) {
  require(std::isfinite(config.alpha) && config.alpha >= 0.0, Errc::invalid_argument,
          "alpha must be finite and non-negative");
  require(config.clip_max > 0.0 && config.clip_max <= 1.0, Errc::invalid_argument,
          "clip_max must lie in (0, 1]");
  require(config.temperature > 0.0 && std::isfinite(config.temperature), Errc::invalid_argument,
          "temperature must be positive");
  require(!config.layer_set.empty(), Errc::invalid_argument, "layer set is empty");
  require(std::find(config.layer_set.begin(), config.layer_set.end(), config.anchor_layer) ==
              config.layer_set.end(),
          Errc::invalid_argument,
          "layer set contains the anchor layer " + std::to_string(config.anchor_layer));
}

namespace {

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    fail(Errc::invalid_argument,
         "bad " + std::string(what) + " '" + std::string(text) + "' in layer selector");
  }
  return value;
}

}  // namespace

std::vector<LayerIndex> resolve_layer_selector(std::string_view selector,
                                               std::span<const LayerIndex> available,
                                               LayerIndex anchor) {
  std::vector<LayerIndex> below;
  for (LayerIndex layer : available) {
    if (layer < anchor) below.push_back(layer);
  }
  std::sort(below.begin(), below.end());
  below.erase(std::unique(below.begin(), below.end()), below.end());

  std::vector<LayerIndex> out;
  if (selector.starts_with("last")) {
    std::string_view rest = selector.substr(4);
    int parity = -1;
    if (const auto colon = rest.find(':'); colon != std::string_view::npos) {
      const auto suffix = rest.substr(colon + 1);
      if (suffix == "even") {
        parity = 0;
      } else if (suffix == "odd") {
        parity = 1;
      } else {
        fail(Errc::invalid_argument, "layer selector suffix must be even|odd, got '" +
                                         std::string(suffix) + "'");
      }
      rest = rest.substr(0, colon);
    }
    const int count = parse_int(rest, "layer count");
    require(count > 0, Errc::invalid_argument, "layer selector count must be positive");
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(count), below.size());
    out.assign(below.end() - static_cast<std::ptrdiff_t>(take), below.end());
    if (parity >= 0) {
      std::erase_if(out, [parity](LayerIndex l) { return std::abs(l % 2) != parity; });
    }
  } else {
    std::size_t pos = 0;
    while (pos <= selector.size()) {
      const auto comma = selector.find(',', pos);
      const auto piece = selector.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                            : comma - pos);
      const int layer = parse_int(piece, "layer index");
      require(layer != anchor, Errc::invalid_argument,
              "layer selector names the anchor layer " + std::to_string(anchor));
      require(std::find(available.begin(), available.end(), layer) != available.end(),
              Errc::invalid_argument, "layer " + std::to_string(layer) + " is not available");
      out.push_back(layer);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  }
  require(!out.empty(), Errc::invalid_argument,
          "layer selector '" + std::string(selector) + "' selects no layers");
  return out;
}

WeightVector aggregate_heads(std::span<const WeightVector> per_head_rows) {
  require(!per_head_rows.empty(), Errc::invalid_argument, "aggregate_heads: no heads");
  const Eigen::Index width = per_head_rows.front().size();
  WeightVector sum = WeightVector::Zero(width);
  for (const auto& row : per_head_rows) {
    require(row.size() == width, Errc::invalid_argument,
            "aggregate_heads: ragged head rows (" + std::to_string(row.size()) + " vs " +
                std::to_string(width) + ")");
    sum += row;
  }
  return sum / static_cast<double>(per_head_rows.size());
}

ProbVector pointer_distribution(const StepTrace& trace, const TokenFilter& filter) {
  const Eigen::Index vocab = trace.vocab_size();
  const SourceSpan span = trace.source_span;
  require(span.start < span.end && span.end <= trace.context_tokens.size() &&
              span.end <= static_cast<std::size_t>(trace.attention.size()),
          Errc::invalid_argument, "pointer_distribution: span outside the context");

  std::vector<std::size_t> kept;
  kept.reserve(span.size());
  for (std::size_t i = span.start; i < span.end; ++i) {
    const TokenId token = trace.context_tokens[i];
    require(token >= 0 && token < vocab, Errc::invalid_argument,
            "pointer_distribution: span token " + std::to_string(token) + " outside vocabulary");
    if (!filter.contains(token)) kept.push_back(i);
  }
  require(!kept.empty(), Errc::degenerate_span, "pointer_distribution: every span token filtered");

  WeightVector weights(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    weights[static_cast<Eigen::Index>(k)] = trace.attention[static_cast<Eigen::Index>(kept[k])];
  }
  const WeightVector normalized = normalize_span(weights);

  ProbVector source = ProbVector::Zero(vocab);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    source[trace.context_tokens[kept[k]]] += normalized[static_cast<Eigen::Index>(k)];
  }
  return source;
}

namespace {

double aggregate(std::span<const double> values, Aggregator agg) {
  switch (agg) {
    case Aggregator::mean:
      return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    case Aggregator::max: return *std::max_element(values.begin(), values.end());
    case Aggregator::min: return *std::min_element(values.begin(), values.end());
  }
  return 0.0;
}

}  // namespace

double copy_probability_from_divergences(std::span<const double> divergences,
                                         const PigConfig& config) {
  require(!divergences.empty(), Errc::invalid_argument, "copy_probability: no candidate layers");
  if (config.alpha == 0.0) return 0.0;
  return std::min(config.alpha * aggregate(divergences, config.aggregator), config.clip_max);
}

double copy_probability(const ProbVector& anchor, std::span<const ProbVector> candidates,
                        const PigConfig& config) {
  require(!candidates.empty(), Errc::invalid_argument, "copy_probability: no candidate layers");
  std::vector<double> divergences;
  divergences.reserve(candidates.size());
  for (const auto& candidate : candidates) divergences.push_back(jsd(anchor, candidate));
  return copy_probability_from_divergences(divergences, config);
}

ProbVector mix_distributions(double p_cp, const ProbVector& source, const ProbVector& vocab) {
  require(p_cp >= 0.0 && p_cp <= 1.0, Errc::invalid_argument, "mix: p_cp outside [0, 1]");
  require(source.size() == vocab.size(), Errc::invalid_argument,
          "mix: length mismatch (" + std::to_string(source.size()) + " vs " +
              std::to_string(vocab.size()) + ")");
  return p_cp * source + (1.0 - p_cp) * vocab;
}

void validate(const StepTrace& trace, const PigConfig& config) {
  validate(config);
  const auto anchor = trace.layer_logits.find(config.anchor_layer);
  require(anchor != trace.layer_logits.end(), Errc::invalid_argument,
          "trace lacks the anchor layer " + std::to_string(config.anchor_layer));
  const Eigen::Index vocab = anchor->second.size();
  require(vocab > 0, Errc::invalid_argument, "trace has an empty vocabulary");
  for (LayerIndex layer : config.layer_set) {
    const auto it = trace.layer_logits.find(layer);
    require(it != trace.layer_logits.end(), Errc::invalid_argument,
            "trace lacks candidate layer " + std::to_string(layer));
    require(it->second.size() == vocab, Errc::invalid_argument,
            "layer " + std::to_string(layer) + " has " + std::to_string(it->second.size()) +
                " logits, anchor has " + std::to_string(vocab));
  }
  require(static_cast<std::size_t>(trace.attention.size()) == trace.context_tokens.size(),
          Errc::invalid_argument,
          "attention row has " + std::to_string(trace.attention.size()) + " entries for " +
              std::to_string(trace.context_tokens.size()) + " context tokens");
  require(trace.attention.allFinite() && (trace.attention.size() == 0 || trace.attention.minCoeff() >= 0.0),
          Errc::invalid_argument, "attention row must be finite and non-negative");
  const SourceSpan span = trace.source_span;
  require(span.start < span.end && span.end <= trace.context_tokens.size(), Errc::invalid_argument,
          "source span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
              ") is empty or outside the context");
}

StepOutput decode_step(const StepTrace& trace, const PigConfig& config) {
  validate(trace, config);
  const LogitsVector& anchor_logits = trace.layer_logits.at(config.anchor_layer);
  const SoftmaxRow anchor = softmax_row(anchor_logits);

  StepOutput out;
  out.vocab = config.temperature == 1.0 ? anchor.probs : softmax(anchor_logits, config.temperature);

  StepDiagnostics& diag = out.diagnostics;
  std::vector<double> divergences;
  divergences.reserve(config.layer_set.size());
  diag.layer_divergence.reserve(config.layer_set.size());
  for (LayerIndex layer : config.layer_set) {
    const double d = softmax_jsd(anchor_logits, anchor, trace.layer_logits.at(layer));
    divergences.push_back(d);
    diag.layer_divergence.emplace_back(layer, d);
  }
  diag.p_cp = copy_probability_from_divergences(divergences, config);
  diag.aggregated_divergence = aggregate(divergences, config.aggregator);

  ProbVector source;
  try {
    source = pointer_distribution(trace, config.token_filter);
  } catch (const Error& e) {
    if (e.code() != Errc::degenerate_span) throw;
    diag.degenerate_span = true;
    diag.p_cp = 0.0;
    out.distribution = out.vocab;
    return out;
  }

  std::unordered_set<TokenId> seen;
  for (std::size_t i = trace.source_span.start; i < trace.source_span.end; ++i) {
    const TokenId token = trace.context_tokens[i];
    if (config.token_filter.contains(token) || !seen.insert(token).second) continue;
    diag.span_mass.emplace_back(token, source[token]);
  }

  out.distribution = mix_distributions(diag.p_cp, source, out.vocab);
  return out;
}

}  // namespace largepig
