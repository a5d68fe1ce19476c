// SPDX-License-Identifier: Apache-2.0
//
// Latency of the engine math alone: decode_step on pre-generated random
// traces, against a plain softmax of the anchor logits.
#pragma once

#include "largepig/engine.hpp"

#include <cstdint>

namespace largepig {

struct BenchStats {
  Eigen::Index vocab_size = 0;
  std::size_t layer_count = 0;
  std::size_t repetitions = 0;
  double median_ms = 0.0;
  double p99_ms = 0.0;
  double mean_ms = 0.0;
  double wall_ms = 0.0;  ///< all timed decode_step calls, including loop overhead
  double baseline_median_ms = 0.0;
  double ratio = 0.0;  ///< median / baseline median
};

/// `layer_count` candidate layers (0..layer_count-1) are compared against the
/// anchor layer `layer_count`. `config`'s layer fields are overwritten;
/// alpha, clip, aggregator, filter and temperature are used as given.
/// Throws invalid-argument for fewer than 100 repetitions.
BenchStats bench_step(PigConfig config, Eigen::Index vocab_size, std::size_t layer_count,
                      std::size_t repetitions, std::uint64_t seed = 0);

}  // namespace largepig
