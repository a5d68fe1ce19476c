// SPDX-License-Identifier: Apache-2.0
#include "largepig/error.hpp"

namespace largepig {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::divergence_undefined: return "divergence-undefined";
    case Errc::degenerate_span: return "degenerate-span";
    case Errc::end_of_trace: return "end-of-trace";
    case Errc::out_of_sequence: return "out-of-sequence";
    case Errc::schema: return "schema";
    case Errc::unsupported_version: return "unsupported-version";
    case Errc::io: return "io";
    case Errc::internal: return "internal";
  }
  return "unknown";
}

}  // namespace largepig
