// SPDX-License-Identifier: Apache-2.0
#include "generators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gen {

using namespace largepig;

ProbVector prob(Source& s, Eigen::Index n, bool sparse) {
  ProbVector p(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p[i] = sparse && s.coin(0.33) ? 0.0 : -std::log(1.0 - s.uniform());
  }
  if (p.sum() == 0.0) p[static_cast<Eigen::Index>(s.index(static_cast<std::size_t>(n)))] = 1.0;
  return p / p.sum();
}

LogitsVector logits(Source& s, Eigen::Index n) {
  const double scale = s.coin(0.1) ? s.uniform(10.0, 60.0) : s.uniform(0.1, 5.0);
  const double shift = s.uniform(-30.0, 30.0);
  LogitsVector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = static_cast<float>(shift + scale * s.normal());
  return x;
}

namespace {

StepTrace skeleton(Source& s, const TraceShape& shape) {
  StepTrace t;
  const std::size_t context = shape.min_context + s.index(shape.max_context - shape.min_context + 1);
  t.context_tokens.resize(context);
  // Draw from a small pool so spans repeat tokens.
  const auto pool = static_cast<std::size_t>(std::max<Eigen::Index>(1, s.coin() ? shape.vocab : 4));
  for (auto& token : t.context_tokens) token = static_cast<TokenId>(s.index(pool));
  const std::size_t start = s.index(context);
  const std::size_t end = start + 1 + s.index(context - start);
  t.source_span = {start, end};
  t.attention.resize(static_cast<Eigen::Index>(context));
  const bool dead_span = s.coin(0.03);
  for (std::size_t i = 0; i < context; ++i) {
    const bool in_span = i >= start && i < end;
    double w = s.coin(0.15) ? 0.0 : s.uniform();
    if (dead_span && in_span) w = 0.0;
    t.attention[static_cast<Eigen::Index>(i)] = static_cast<double>(static_cast<float>(w));
  }
  return t;
}

}  // namespace

StepTrace trace(Source& s, const TraceShape& shape) {
  StepTrace t = skeleton(s, shape);
  const LogitsVector anchor = logits(s, shape.vocab);
  for (int layer = 1; layer < shape.layers; ++layer) {
    const double kind = s.uniform();
    LogitsVector row;
    if (kind < 0.25) {
      row = anchor;
    } else if (kind < 0.7) {
      const double eps = std::pow(10.0, s.uniform(-6.0, 0.0));
      row = anchor;
      for (Eigen::Index i = 0; i < row.size(); ++i) row[i] += static_cast<float>(eps * s.normal());
    } else {
      row = logits(s, shape.vocab);
    }
    t.layer_logits.emplace(layer, std::move(row));
  }
  t.layer_logits.emplace(shape.layers, anchor);
  return t;
}

StepTrace identical_layers(Source& s, const TraceShape& shape) {
  StepTrace t = skeleton(s, shape);
  const LogitsVector anchor = logits(s, shape.vocab);
  for (int layer = 1; layer <= shape.layers; ++layer) t.layer_logits.emplace(layer, anchor);
  return t;
}

PigConfig config(Source& s, const TraceShape& shape) {
  PigConfig c;
  const double alphas[] = {1.0, 10.0, 100.0, 500.0, 1000.0};
  c.alpha = alphas[s.index(5)];
  c.clip_max = s.coin(0.7) ? 0.5 : s.uniform(0.05, 0.5);
  const Aggregator aggs[] = {Aggregator::mean, Aggregator::max, Aggregator::min};
  c.aggregator = aggs[s.index(3)];
  c.anchor_layer = shape.layers;
  c.attention_layer = shape.layers;
  for (int layer = 1; layer < shape.layers; ++layer) {
    if (s.coin(0.6)) c.layer_set.push_back(layer);
  }
  if (c.layer_set.empty()) c.layer_set.push_back(shape.layers - 1);
  if (s.coin(0.2)) {
    for (int k = 0; k < 3; ++k) c.token_filter.insert(static_cast<TokenId>(s.index(static_cast<std::size_t>(shape.vocab))));
  }
  const double temps[] = {1.0, 1.0, 0.8, 1.5, 0.3};
  c.temperature = temps[s.index(5)];
  return c;
}

reference::Trace to_reference(const StepTrace& t) {
  reference::Trace r;
  r.context.assign(t.context_tokens.begin(), t.context_tokens.end());
  r.span_start = t.source_span.start;
  r.span_end = t.source_span.end;
  for (const auto& [layer, row] : t.layer_logits) r.logits[layer] = std::vector<float>(row.data(), row.data() + row.size());
  r.attention.assign(t.attention.data(), t.attention.data() + t.attention.size());
  return r;
}

reference::Config to_reference(const PigConfig& c) {
  reference::Config r;
  r.alpha = c.alpha;
  r.clip = c.clip_max;
  r.agg = std::string(to_string(c.aggregator));
  r.layers.assign(c.layer_set.begin(), c.layer_set.end());
  r.anchor = c.anchor_layer;
  r.filter.insert(c.token_filter.begin(), c.token_filter.end());
  r.temperature = c.temperature;
  return r;
}

}  // namespace gen
