// SPDX-License-Identifier: Apache-2.0
#include "largepig/trace.hpp"

#include "largepig/atomic_file.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace largepig {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(TraceFault fault) noexcept {
  switch (fault) {
    case TraceFault::malformed_line: return "malformed-line";
    case TraceFault::unknown_key: return "unknown-key";
    case TraceFault::version: return "version";
    case TraceFault::vocab: return "vocab";
    case TraceFault::layers: return "layers";
    case TraceFault::anchor: return "anchor";
    case TraceFault::attention_layer: return "attn_layer";
    case TraceFault::prompt: return "prompt";
    case TraceFault::span: return "span";
    case TraceFault::meta: return "meta";
    case TraceFault::step_position: return "step-pos";
    case TraceFault::step_layers: return "step-layers";
    case TraceFault::step_logits: return "step-logits";
    case TraceFault::step_attention: return "step-attn";
    case TraceFault::step_forced: return "step-forced";
    case TraceFault::missing_header: return "missing-header";
  }
  return "unknown";
}

namespace {

[[noreturn]] void reject(TraceFault fault, std::size_t line, const std::string& what,
                         Errc code = Errc::schema) {
  throw TraceError(fault, line, code,
                   "trace line " + std::to_string(line) + " [" + std::string(to_string(fault)) +
                       "]: " + what);
}

// f32 arrays travel as little-endian bytes in base 64.
std::string encode_f32(const float* data, std::size_t count) {
  std::string bytes(count * sizeof(float), '\0');
  for (std::size_t i = 0; i < count; ++i) {
    auto bits = std::bit_cast<std::uint32_t>(data[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    std::memcpy(bytes.data() + i * sizeof(float), &bits, sizeof(bits));
  }
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                      reinterpret_cast<const unsigned char*>(bytes.data()),
                                      static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

// Returns nullopt unless `text` is canonical base 64 of exactly `count` floats.
std::optional<Vector<float>> decode_f32(std::string_view text, std::size_t count) {
  const std::size_t bytes = count * sizeof(float);
  if (text.size() != 4 * ((bytes + 2) / 3)) return std::nullopt;
  if (count == 0) return Vector<float>();
  std::string raw(text.size() / 4 * 3, '\0');
  const int decoded = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(raw.data()),
                                      reinterpret_cast<const unsigned char*>(text.data()),
                                      static_cast<int>(text.size()));
  if (decoded < 0 || static_cast<std::size_t>(decoded) < bytes) return std::nullopt;
  Vector<float> out(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, raw.data() + i * sizeof(float), sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    out[static_cast<Eigen::Index>(i)] = std::bit_cast<float>(bits);
  }
  return out;
}

bool is_int(const json& value) { return value.is_number_integer(); }

TraceHeader parse_header(const json& doc) {
  constexpr std::size_t line = 1;
  if (!doc.is_object()) reject(TraceFault::malformed_line, line, "header is not a JSON object");
  static const std::set<std::string> known = {"v",      "vocab", "layers", "anchor",
                                              "attn_layer", "prompt", "span", "meta"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) reject(TraceFault::unknown_key, line, "unknown header key '" + key + "'");
  }

  TraceHeader header;
  if (!doc.contains("v") || !is_int(doc["v"])) {
    reject(TraceFault::version, line, "missing or non-integer format version 'v'");
  }
  if (doc["v"].get<long long>() != kTraceFormatVersion) {
    reject(TraceFault::version, line,
           "unsupported format version " + doc["v"].dump() + " (expected " +
               std::to_string(kTraceFormatVersion) + ")",
           Errc::unsupported_version);
  }

  if (!doc.contains("vocab") || !is_int(doc["vocab"]) || doc["vocab"].get<long long>() <= 0 ||
      doc["vocab"].get<long long>() > (1LL << 31)) {
    reject(TraceFault::vocab, line, "'vocab' must be a positive integer");
  }
  header.vocab_size = doc["vocab"].get<Eigen::Index>();

  const json* layers = doc.contains("layers") ? &doc["layers"] : nullptr;
  if (!layers || !layers->is_array() || layers->empty()) {
    reject(TraceFault::layers, line, "'layers' must be a non-empty array of layer indices");
  }
  for (const auto& layer : *layers) {
    if (!is_int(layer) || layer.get<long long>() < 0 || layer.get<long long>() > 1'000'000) {
      reject(TraceFault::layers, line, "'layers' entries must be non-negative integers");
    }
    header.layers.push_back(layer.get<LayerIndex>());
  }
  if (!std::is_sorted(header.layers.begin(), header.layers.end()) ||
      std::adjacent_find(header.layers.begin(), header.layers.end()) != header.layers.end()) {
    reject(TraceFault::layers, line, "'layers' must be strictly increasing");
  }

  if (!doc.contains("anchor") || !is_int(doc["anchor"])) {
    reject(TraceFault::anchor, line, "missing or non-integer 'anchor'");
  }
  header.anchor_layer = doc["anchor"].get<LayerIndex>();
  if (!std::binary_search(header.layers.begin(), header.layers.end(), header.anchor_layer)) {
    reject(TraceFault::anchor, line,
           "anchor layer " + std::to_string(header.anchor_layer) + " not listed in 'layers'");
  }

  if (!doc.contains("attn_layer") || !is_int(doc["attn_layer"]) ||
      doc["attn_layer"].get<long long>() < 0) {
    reject(TraceFault::attention_layer, line, "'attn_layer' must be a non-negative integer");
  }
  header.attention_layer = doc["attn_layer"].get<LayerIndex>();

  const json* prompt = doc.contains("prompt") ? &doc["prompt"] : nullptr;
  if (!prompt || !prompt->is_array() || prompt->empty()) {
    reject(TraceFault::prompt, line, "'prompt' must be a non-empty array of token ids");
  }
  for (const auto& token : *prompt) {
    if (!is_int(token) || token.get<long long>() < 0 || token.get<long long>() >= header.vocab_size) {
      reject(TraceFault::prompt, line, "prompt token " + token.dump() + " outside [0, vocab)");
    }
    header.prompt.push_back(token.get<TokenId>());
  }

  const json* span = doc.contains("span") ? &doc["span"] : nullptr;
  if (!span || !span->is_array() || span->size() != 2 || !is_int((*span)[0]) || !is_int((*span)[1])) {
    reject(TraceFault::span, line, "'span' must be [start, end)");
  }
  const long long start = (*span)[0].get<long long>();
  const long long end = (*span)[1].get<long long>();
  if (start < 0 || start >= end || end > static_cast<long long>(header.prompt.size())) {
    reject(TraceFault::span, line,
           "span [" + std::to_string(start) + ", " + std::to_string(end) +
               ") must be non-empty and inside the prompt");
  }
  header.span = {static_cast<std::size_t>(start), static_cast<std::size_t>(end)};

  if (doc.contains("meta")) {
    if (!doc["meta"].is_object()) reject(TraceFault::meta, line, "'meta' must be an object");
    header.meta = doc["meta"];
  }
  return header;
}

TraceStep parse_step(const json& doc, const TraceHeader& header, std::size_t index, std::size_t line) {
  if (!doc.is_object()) reject(TraceFault::malformed_line, line, "step is not a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "pos" && key != "logits" && key != "attn" && key != "forced") {
      reject(TraceFault::unknown_key, line, "unknown step key '" + key + "'");
    }
  }
  TraceStep step;
  const std::size_t expected = header.prompt.size() + index;
  if (!doc.contains("pos") || !is_int(doc["pos"]) || doc["pos"].get<long long>() < 0 ||
      doc["pos"].get<std::size_t>() != expected) {
    reject(TraceFault::step_position, line,
           "expected pos " + std::to_string(expected) + ", got " +
               (doc.contains("pos") ? doc["pos"].dump() : std::string("nothing")));
  }
  step.position = expected;

  if (!doc.contains("logits") || !doc["logits"].is_object() ||
      doc["logits"].size() != header.layers.size()) {
    reject(TraceFault::step_layers, line, "'logits' must hold exactly the header's layers");
  }
  const auto vocab = static_cast<std::size_t>(header.vocab_size);
  for (LayerIndex layer : header.layers) {
    const auto key = std::to_string(layer);
    const auto& logits = doc["logits"];
    if (!logits.contains(key)) reject(TraceFault::step_layers, line, "missing logits for layer " + key);
    if (!logits[key].is_string()) reject(TraceFault::step_logits, line, "layer " + key + " payload is not a string");
    auto values = decode_f32(logits[key].get_ref<const std::string&>(), vocab);
    if (!values) {
      reject(TraceFault::step_logits, line,
             "layer " + key + " payload is not " + std::to_string(vocab) + " base-64 f32 values");
    }
    if (!values->allFinite()) reject(TraceFault::step_logits, line, "layer " + key + " has non-finite logits");
    step.layer_logits.emplace(layer, std::move(*values));
  }

  if (!doc.contains("attn") || !doc["attn"].is_string()) {
    reject(TraceFault::step_attention, line, "missing 'attn' payload");
  }
  auto attention = decode_f32(doc["attn"].get_ref<const std::string&>(), expected);
  if (!attention) {
    reject(TraceFault::step_attention, line,
           "'attn' is not " + std::to_string(expected) + " base-64 f32 values");
  }
  if (!attention->allFinite() || (attention->size() > 0 && attention->minCoeff() < 0.0f)) {
    reject(TraceFault::step_attention, line, "attention weights must be finite and non-negative");
  }
  step.attention = std::move(*attention);

  if (doc.contains("forced")) {
    const auto& forced = doc["forced"];
    if (!is_int(forced) || forced.get<long long>() < 0 || forced.get<long long>() >= header.vocab_size) {
      reject(TraceFault::step_forced, line, "forced token " + forced.dump() + " outside [0, vocab)");
    }
    step.forced = forced.get<TokenId>();
  }
  return step;
}

json parse_line(std::string_view text, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    reject(TraceFault::malformed_line, line, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

TraceStep make_trace_step(const StepTrace& step, std::optional<TokenId> forced) {
  TraceStep out;
  out.position = step.context_tokens.size();
  out.layer_logits = step.layer_logits;
  out.attention = step.attention.cast<float>();
  out.forced = forced;
  return out;
}

TraceHeader make_trace_header(const Session& session, nlohmann::json meta) {
  if (meta.is_null()) meta = nlohmann::json::object();
  require(meta.is_object(), Errc::invalid_argument, "trace metadata must be a JSON object");
  const auto& caps = session.capabilities();
  TraceHeader header;
  header.vocab_size = caps.vocab_size;
  header.layers = caps.layers;
  header.anchor_layer = caps.anchor_layer;
  header.attention_layer = caps.attention_layer;
  header.prompt = session.prompt();
  header.span = session.source_span();
  header.meta = std::move(meta);
  return header;
}

std::string write_trace(const TraceFile& trace) {
  const TraceHeader& h = trace.header;
  require(h.vocab_size > 0, Errc::invalid_argument, "write_trace: vocabulary must be positive");
  require(!h.layers.empty() && std::is_sorted(h.layers.begin(), h.layers.end()) &&
              std::adjacent_find(h.layers.begin(), h.layers.end()) == h.layers.end(),
          Errc::invalid_argument, "write_trace: layers must be non-empty and strictly increasing");
  require(std::binary_search(h.layers.begin(), h.layers.end(), h.anchor_layer),
          Errc::invalid_argument, "write_trace: anchor not among layers");
  require(h.span.start < h.span.end && h.span.end <= h.prompt.size(), Errc::invalid_argument,
          "write_trace: span outside prompt");
  require(h.meta.is_object(), Errc::invalid_argument, "write_trace: meta must be an object");

  ordered_json header;
  header["v"] = h.version;
  header["vocab"] = h.vocab_size;
  header["layers"] = h.layers;
  header["anchor"] = h.anchor_layer;
  header["attn_layer"] = h.attention_layer;
  header["prompt"] = h.prompt;
  header["span"] = {h.span.start, h.span.end};
  header["meta"] = h.meta;

  std::ostringstream out;
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const TraceStep& s = trace.steps[i];
    const std::size_t expected = h.prompt.size() + i;
    require(s.position == expected, Errc::invalid_argument,
            "write_trace: step " + std::to_string(i) + " has position " +
                std::to_string(s.position) + ", expected " + std::to_string(expected));
    require(s.layer_logits.size() == h.layers.size(), Errc::invalid_argument,
            "write_trace: step " + std::to_string(i) + " layer set differs from header");
    require(static_cast<std::size_t>(s.attention.size()) == expected, Errc::invalid_argument,
            "write_trace: step " + std::to_string(i) + " attention length " +
                std::to_string(s.attention.size()) + " != position " + std::to_string(expected));
    ordered_json line;
    line["pos"] = s.position;
    ordered_json logits = ordered_json::object();
    for (LayerIndex layer : h.layers) {
      const auto it = s.layer_logits.find(layer);
      require(it != s.layer_logits.end(), Errc::invalid_argument,
              "write_trace: step " + std::to_string(i) + " lacks layer " + std::to_string(layer));
      require(it->second.size() == h.vocab_size, Errc::invalid_argument,
              "write_trace: step " + std::to_string(i) + " layer " + std::to_string(layer) +
                  " has " + std::to_string(it->second.size()) + " logits");
      logits[std::to_string(layer)] = encode_f32(it->second.data(), static_cast<std::size_t>(it->second.size()));
    }
    line["logits"] = std::move(logits);
    line["attn"] = encode_f32(s.attention.data(), static_cast<std::size_t>(s.attention.size()));
    if (s.forced) line["forced"] = *s.forced;
    out << line.dump() << '\n';
  }
  return out.str();
}

TraceFile read_trace(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) reject(TraceFault::missing_header, 1, "empty trace file");

  TraceFile trace;
  trace.header = parse_header(parse_line(lines[0], 1));
  trace.steps.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    trace.steps.push_back(parse_step(parse_line(lines[i], i + 1), trace.header, i - 1, i + 1));
  }
  return trace;
}

TraceFile load_trace(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return read_trace(text);
  } catch (const TraceError& e) {
    throw TraceError(e.fault(), e.line(), e.code(), path.string() + ": " + e.what());
  }
}

void save_trace(const std::filesystem::path& path, const TraceFile& trace) {
  write_file_atomic(path, write_trace(trace));
}

TokenSeq forced_tokens(const TraceFile& trace) {
  TokenSeq out;
  for (const auto& step : trace.steps) {
    if (!step.forced) break;
    out.push_back(*step.forced);
  }
  return out;
}

TraceSession::TraceSession(std::shared_ptr<const TraceFile> trace)
    : Session(trace->header.prompt, trace->header.span), trace_(std::move(trace)) {
  caps_.vocab_size = trace_->header.vocab_size;
  caps_.layers = trace_->header.layers;
  caps_.anchor_layer = trace_->header.anchor_layer;
  caps_.attention_layer = trace_->header.attention_layer;
}

Session::Payload TraceSession::produce(std::size_t step, const TokenSeq& /*context*/,
                                       std::optional<TokenId> forced) {
  if (step >= trace_->steps.size()) {
    fail(Errc::end_of_trace, "trace has only " + std::to_string(trace_->steps.size()) + " steps");
  }
  const TraceStep& recorded = trace_->steps[step];
  if (forced && recorded.forced && *forced != *recorded.forced) {
    fail(Errc::invalid_argument, "step " + std::to_string(step) + " was recorded with forced token " +
                                     std::to_string(*recorded.forced) + ", not " +
                                     std::to_string(*forced));
  }
  Payload payload;
  payload.layer_logits = recorded.layer_logits;
  payload.attention = recorded.attention.cast<double>();
  return payload;
}

}  // namespace largepig
