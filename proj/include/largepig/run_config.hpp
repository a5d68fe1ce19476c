// SPDX-License-Identifier: Apache-2.0
//
// Everything a CLI run depends on, in one serializable record. The
// fingerprint hashes the canonical JSON form, minus fields that cannot
// change results (output path, job count).
#pragma once

#include "largepig/backend.hpp"
#include "largepig/decoder.hpp"
#include "largepig/engine.hpp"
#include "largepig/eval.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace largepig {

struct RunConfig {
  std::string command;

  // Engine.
  std::vector<double> alpha{500.0};  ///< more than one value makes a grid
  double clip = 0.5;
  Aggregator aggregator = Aggregator::max;
  std::string layers = "last16";
  std::optional<LayerIndex> anchor_layer;
  std::optional<LayerIndex> attn_layer;
  std::vector<TokenId> filter;
  /// Sampling temperature for decode, scoring temperature elsewhere.
  double temperature = 1.0;

  // Sampling.
  SamplingMode mode = SamplingMode::temperature;
  std::size_t max_new_tokens = 256;
  std::vector<TokenId> stop;
  std::uint64_t seed = 0;

  // Inputs and outputs.
  std::string trace;
  std::string data;
  std::string trace_dir;
  std::string predictions;
  std::string out;

  // Evaluation.
  std::size_t folds = 1;
  std::uint64_t fold_seed = 0;
  std::size_t jobs = 1;
  eval::Mc3Convention mc3 = eval::Mc3Convention::multiset;
  bool per_token_average = false;
  bool strip_articles = true;

  // trace-synth.
  std::string steps;
  std::int64_t vocab = 16;
  int num_layers = 8;
  double divergence_floor = 0.05;
  std::vector<TokenId> span_tokens;
  /// Record a teacher-forced scoring trace for these tokens instead of greedy steps.
  std::vector<TokenId> forced;
  nlohmann::json meta = nlohmann::json::object();

  // bench.
  std::size_t bench_layers = 16;
  std::size_t repetitions = 200;

  PigConfig pig_config(double alpha_value) const;
  LayerChoice layer_choice() const;
  SamplingParams sampling() const;

  nlohmann::json to_json() const;
  /// Missing fields keep their value in `base`; unknown fields are rejected.
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
  static RunConfig from_json(const nlohmann::json& j);

  /// Hex SHA-256 of the canonical JSON without `out` and `jobs`.
  std::string fingerprint() const;
};

/// Report layout shared by every subcommand.
nlohmann::ordered_json make_report(const RunConfig& config, nlohmann::ordered_json metrics,
                                   nlohmann::ordered_json items, nlohmann::ordered_json timing);

/// Serializes with two-space indentation and writes atomically.
void write_report(const std::filesystem::path& path, const nlohmann::ordered_json& report);

std::string sha256_hex(std::string_view bytes);

}  // namespace largepig
