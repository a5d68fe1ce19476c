// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace largepig {

/// Broad failure categories. The CLI maps every category except `internal`
/// to exit code 1.
enum class Errc {
  invalid_argument,
  divergence_undefined,
  degenerate_span,
  end_of_trace,
  out_of_sequence,
  schema,
  unsupported_version,
  io,
  internal,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace largepig
