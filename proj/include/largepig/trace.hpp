// SPDX-License-Identifier: Apache-2.0
//
// ".pigtrace" codec and the session that replays it.
//
// Line 1 is a JSON header:
//   {"v":1,"vocab":V,"layers":[...],"anchor":N,"attn_layer":A,
//    "prompt":[ids],"span":[start,end],"meta":{...}}
// followed by one JSON line per step:
//   {"pos":t,"logits":{"<layer>":"<b64 f32le>",...},"attn":"<b64 f32le>","forced":id}
// `pos` is the context length at that step, so the attention row has `pos`
// entries and positions increase by one per line. "forced" is optional.
#pragma once

#include "largepig/backend.hpp"
#include "largepig/error.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace largepig {

inline constexpr int kTraceFormatVersion = 1;

/// Which part of a trace file was rejected. Each header field has its own
/// fault so a corrupted file can be diagnosed from the category alone.
enum class TraceFault {
  malformed_line,
  unknown_key,
  version,
  vocab,
  layers,
  anchor,
  attention_layer,
  prompt,
  span,
  meta,
  step_position,
  step_layers,
  step_logits,
  step_attention,
  step_forced,
  missing_header,
};

std::string_view to_string(TraceFault fault) noexcept;

class TraceError : public Error {
 public:
  /// `what` is the full message; `code` is unsupported-version for a
  /// version mismatch and schema otherwise.
  TraceError(TraceFault fault, std::size_t line, Errc code, const std::string& what)
      : Error(code, what), fault_(fault), line_(line) {}

  TraceFault fault() const noexcept { return fault_; }
  /// 1-based line number in the trace file.
  std::size_t line() const noexcept { return line_; }

 private:
  TraceFault fault_;
  std::size_t line_;
};

struct TraceHeader {
  int version = kTraceFormatVersion;
  Eigen::Index vocab_size = 0;
  std::vector<LayerIndex> layers;
  LayerIndex anchor_layer = 0;
  LayerIndex attention_layer = 0;
  TokenSeq prompt;
  SourceSpan span;
  nlohmann::json meta = nlohmann::json::object();

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

struct TraceStep {
  std::size_t position = 0;
  std::map<LayerIndex, LogitsVector> layer_logits;
  Vector<float> attention;
  std::optional<TokenId> forced;
};

struct TraceFile {
  TraceHeader header;
  std::vector<TraceStep> steps;
};

/// Captures a StepTrace at trace precision. `forced` marks a teacher-forced step.
TraceStep make_trace_step(const StepTrace& step, std::optional<TokenId> forced = std::nullopt);

/// Header describing what `session` serves, with the given metadata (null reads as {}).
TraceHeader make_trace_header(const Session& session, nlohmann::json meta = nlohmann::json::object());

/// Serializes a trace. Throws invalid-argument when a step is inconsistent
/// with the header (layer set, vocabulary, positions, attention length).
std::string write_trace(const TraceFile& trace);

/// Parses and fully validates a trace. Throws TraceError.
TraceFile read_trace(std::string_view text);

TraceFile load_trace(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void save_trace(const std::filesystem::path& path, const TraceFile& trace);

/// The teacher-forced tokens recorded in a scoring trace, in order.
TokenSeq forced_tokens(const TraceFile& trace);

/// Replays a recorded trace. Recorded logits and attention are returned
/// verbatim whatever tokens the caller feeds back; a forced token that
/// disagrees with a recorded one is rejected.
class TraceSession final : public Session {
 public:
  explicit TraceSession(std::shared_ptr<const TraceFile> trace);

  const Capabilities& capabilities() const override { return caps_; }
  const TraceFile& trace() const noexcept { return *trace_; }

 private:
  Payload produce(std::size_t step, const TokenSeq& context, std::optional<TokenId> forced) override;

  std::shared_ptr<const TraceFile> trace_;
  Capabilities caps_;
};

}  // namespace largepig
