// SPDX-License-Identifier: Apache-2.0
#include "largepig/bench.hpp"

#include "largepig/error.hpp"
#include "largepig/prob.hpp"
#include "largepig/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace largepig {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kPoolSize = 8;
constexpr std::size_t kContext = 96;
constexpr std::size_t kSpanEnd = 64;

StepTrace random_trace(Rng& rng, Eigen::Index vocab, std::size_t layers) {
  StepTrace t;
  t.context_tokens.resize(kContext);
  for (auto& token : t.context_tokens) token = static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab)));
  t.source_span = {0, kSpanEnd};
  LogitsVector anchor(vocab);
  for (Eigen::Index i = 0; i < vocab; ++i) anchor[i] = static_cast<float>(4.0 * rng.normal());
  for (std::size_t layer = 0; layer < layers; ++layer) {
    LogitsVector row = anchor;
    for (Eigen::Index i = 0; i < vocab; ++i) row[i] += static_cast<float>(0.5 * rng.normal());
    t.layer_logits.emplace(static_cast<LayerIndex>(layer), std::move(row));
  }
  t.layer_logits.emplace(static_cast<LayerIndex>(layers), std::move(anchor));
  t.attention.resize(kContext);
  for (Eigen::Index i = 0; i < t.attention.size(); ++i) t.attention[i] = rng.uniform();
  return t;
}

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

}  // namespace

BenchStats bench_step(PigConfig config, Eigen::Index vocab_size, std::size_t layer_count,
                      std::size_t repetitions, std::uint64_t seed) {
  require(repetitions >= 100, Errc::invalid_argument, "bench needs at least 100 repetitions");
  require(vocab_size > 0 && layer_count > 0, Errc::invalid_argument, "bench needs a vocabulary and layers");
  config.layer_set.resize(layer_count);
  std::iota(config.layer_set.begin(), config.layer_set.end(), 0);
  config.anchor_layer = static_cast<LayerIndex>(layer_count);
  config.attention_layer = config.anchor_layer;
  validate(config);

  Rng rng(seed);
  std::vector<StepTrace> pool;
  for (std::size_t i = 0; i < kPoolSize; ++i) pool.push_back(random_trace(rng, vocab_size, layer_count));

  // One untimed pass warms caches and thread-local scratch.
  double sink = 0.0;
  for (const auto& t : pool) sink += decode_step(t, config).distribution[0];

  std::vector<double> step_ms(repetitions);
  std::vector<double> base_ms(repetitions);
  const auto wall_start = Clock::now();
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto start = Clock::now();
    const StepOutput out = decode_step(pool[r % kPoolSize], config);
    step_ms[r] = ms_since(start);
    sink += out.distribution[0];
  }
  const double wall = ms_since(wall_start);
  for (std::size_t r = 0; r < repetitions; ++r) {
    const StepTrace& t = pool[r % kPoolSize];
    const auto start = Clock::now();
    const ProbVector p = softmax(t.layer_logits.at(config.anchor_layer), config.temperature);
    base_ms[r] = ms_since(start);
    sink += p[0];
  }
  require(std::isfinite(sink), Errc::internal, "bench produced a non-finite result");

  BenchStats s;
  s.vocab_size = vocab_size;
  s.layer_count = layer_count;
  s.repetitions = repetitions;
  s.median_ms = percentile(step_ms, 0.5);
  s.p99_ms = percentile(step_ms, 0.99);
  s.mean_ms = std::accumulate(step_ms.begin(), step_ms.end(), 0.0) / static_cast<double>(repetitions);
  s.wall_ms = wall;
  s.baseline_median_ms = percentile(base_ms, 0.5);
  s.ratio = s.median_ms / s.baseline_median_ms;
  return s;
}

}  // namespace largepig
