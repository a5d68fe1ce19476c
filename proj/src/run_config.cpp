// SPDX-License-Identifier: Apache-2.0
#include "largepig/run_config.hpp"

#include "largepig/atomic_file.hpp"
#include "largepig/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

namespace largepig {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string_view mc3_name(eval::Mc3Convention c) {
  return c == eval::Mc3Convention::multiset ? "multiset" : "per-item";
}

eval::Mc3Convention parse_mc3(std::string_view text) {
  if (text == "multiset") return eval::Mc3Convention::multiset;
  if (text == "per-item") return eval::Mc3Convention::per_item;
  fail(Errc::invalid_argument, "config field 'mc3': expected multiset|per-item, got '" + std::string(text) + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, std::string("config field '") + key + "': " + e.what());
  }
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, key, v);
  out = v;
}

}  // namespace

PigConfig RunConfig::pig_config(double alpha_value) const {
  PigConfig c;
  c.alpha = alpha_value;
  c.clip_max = clip;
  c.aggregator = aggregator;
  c.token_filter = TokenFilter(filter.begin(), filter.end());
  c.temperature = temperature;
  c.seed = seed;
  return c;
}

LayerChoice RunConfig::layer_choice() const { return {layers, anchor_layer, attn_layer}; }

SamplingParams RunConfig::sampling() const {
  SamplingParams p;
  p.mode = mode;
  p.temperature = temperature;
  p.max_new_tokens = max_new_tokens;
  p.stop_tokens = {stop.begin(), stop.end()};
  p.seed = seed;
  return p;
}

json RunConfig::to_json() const {
  json j;
  j["command"] = command;
  j["alpha"] = alpha;
  j["clip"] = clip;
  j["agg"] = std::string(to_string(aggregator));
  j["layers"] = layers;
  j["anchor_layer"] = anchor_layer ? json(*anchor_layer) : json(nullptr);
  j["attn_layer"] = attn_layer ? json(*attn_layer) : json(nullptr);
  j["filter"] = filter;
  j["temperature"] = temperature;
  j["mode"] = std::string(to_string(mode));
  j["max_new_tokens"] = max_new_tokens;
  j["stop"] = stop;
  j["seed"] = seed;
  j["trace"] = trace;
  j["data"] = data;
  j["trace_dir"] = trace_dir;
  j["pred"] = predictions;
  j["out"] = out;
  j["folds"] = folds;
  j["fold_seed"] = fold_seed;
  j["jobs"] = jobs;
  j["mc3"] = std::string(mc3_name(mc3));
  j["per_token_average"] = per_token_average;
  j["strip_articles"] = strip_articles;
  j["steps"] = steps;
  j["vocab"] = vocab;
  j["num_layers"] = num_layers;
  j["divergence_floor"] = divergence_floor;
  j["span_tokens"] = span_tokens;
  j["forced"] = forced;
  j["meta"] = meta;
  j["bench_layers"] = bench_layers;
  j["repetitions"] = repetitions;
  return j;
}

RunConfig RunConfig::from_json(const json& j, RunConfig base) {
  require(j.is_object(), Errc::invalid_argument, "config must be a JSON object");
  const json known = RunConfig{}.to_json();
  for (const auto& [key, value] : j.items()) {
    require(known.contains(key), Errc::invalid_argument, "unknown config field '" + key + "'");
  }
  RunConfig c = std::move(base);
  read(j, "command", c.command);
  if (const auto it = j.find("alpha"); it != j.end() && it->is_number()) {
    c.alpha = {it->get<double>()};
  } else {
    read(j, "alpha", c.alpha);
  }
  read(j, "clip", c.clip);
  std::string agg(to_string(c.aggregator));
  read(j, "agg", agg);
  c.aggregator = parse_aggregator(agg);
  read(j, "layers", c.layers);
  read(j, "anchor_layer", c.anchor_layer);
  read(j, "attn_layer", c.attn_layer);
  read(j, "filter", c.filter);
  read(j, "temperature", c.temperature);
  std::string mode(to_string(c.mode));
  read(j, "mode", mode);
  c.mode = parse_sampling_mode(mode);
  read(j, "max_new_tokens", c.max_new_tokens);
  read(j, "stop", c.stop);
  read(j, "seed", c.seed);
  read(j, "trace", c.trace);
  read(j, "data", c.data);
  read(j, "trace_dir", c.trace_dir);
  read(j, "pred", c.predictions);
  read(j, "out", c.out);
  read(j, "folds", c.folds);
  read(j, "fold_seed", c.fold_seed);
  read(j, "jobs", c.jobs);
  std::string mc3(mc3_name(c.mc3));
  read(j, "mc3", mc3);
  c.mc3 = parse_mc3(mc3);
  read(j, "per_token_average", c.per_token_average);
  read(j, "strip_articles", c.strip_articles);
  read(j, "steps", c.steps);
  read(j, "vocab", c.vocab);
  read(j, "num_layers", c.num_layers);
  read(j, "divergence_floor", c.divergence_floor);
  read(j, "span_tokens", c.span_tokens);
  read(j, "forced", c.forced);
  read(j, "meta", c.meta);
  require(c.meta.is_object(), Errc::invalid_argument, "config field 'meta': expected an object");
  read(j, "bench_layers", c.bench_layers);
  read(j, "repetitions", c.repetitions);
  return c;
}

RunConfig RunConfig::from_json(const json& j) { return from_json(j, RunConfig{}); }

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    fail(Errc::internal, "SHA-256 failed");
  }
  std::string hex;
  hex.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string RunConfig::fingerprint() const {
  json j = to_json();
  j.erase("out");
  j.erase("jobs");
  return sha256_hex(j.dump());
}

ordered_json make_report(const RunConfig& config, ordered_json metrics, ordered_json items,
                         ordered_json timing) {
  ordered_json report;
  report["config_fingerprint"] = config.fingerprint();
  report["config"] = ordered_json::parse(config.to_json().dump());
  report["metrics"] = std::move(metrics);
  report["items"] = std::move(items);
  report["timing"] = std::move(timing);
  return report;
}

void write_report(const std::filesystem::path& path, const ordered_json& report) {
  write_file_atomic(path, report.dump(2) + "\n");
}

}  // namespace largepig
