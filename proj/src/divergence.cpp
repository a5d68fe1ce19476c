// SPDX-License-Identifier: Apache-2.0
#include "largepig/divergence.hpp"

#include "largepig/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <string>
#include <vector>

namespace largepig {
namespace {

constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;
constexpr double kExpFloor = -708.0;

// Cody-Waite reduction x = k ln2 + r, |r| <= ln2/2, then a degree-13 Taylor
// polynomial (truncation error < 2e-17 on that interval).
inline double exp_kernel(double x) {
  constexpr double kLog2e = 1.4426950408889634;
  constexpr double kShifter = 6755399441055744.0;  // 1.5 * 2^52, rounds to int
  const double xc = x < kExpFloor ? kExpFloor : x;
  const double k = (xc * kLog2e + kShifter) - kShifter;
  double r = xc - k * kLn2Hi;
  r = r - k * kLn2Lo;
  double p = 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  const auto biased = static_cast<std::uint64_t>(static_cast<std::int64_t>(k) + 1023);
  const double scale = std::bit_cast<double>(biased << 52);
  return x < kExpFloor ? 0.0 : p * scale;
}

// x = 2^e * m with m in [sqrt(1/2), sqrt(2)); log m = 2 atanh((m-1)/(m+1)),
// series truncated after the s^11 term (s <= 0.0295).
inline double log_kernel(double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  const auto e = static_cast<std::int64_t>(bits >> 52) - 1023;
  double m = std::bit_cast<double>((bits & 0x000FFFFFFFFFFFFFull) | 0x3FF0000000000000ull);
  const bool high = m > std::numbers::sqrt2;
  m = high ? m * 0.5 : m;
  const double ed = static_cast<double>(high ? e + 1 : e);
  const double f = (m - 1.0) / (m + 1.0);
  const double s = f * f;
  double p = 1.0 / 23;
  p = p * s + 1.0 / 21;
  p = p * s + 1.0 / 19;
  p = p * s + 1.0 / 17;
  p = p * s + 1.0 / 15;
  p = p * s + 1.0 / 13;
  p = p * s + 1.0 / 11;
  p = p * s + 1.0 / 9;
  p = p * s + 1.0 / 7;
  p = p * s + 1.0 / 5;
  p = p * s + 1.0 / 3;
  p = p * s + 1.0;
  return ed * kLn2Hi + (2.0 * f * p + ed * kLn2Lo);
}

// Midpoints below this are treated as empty; their contribution to the
// divergence is bounded by the midpoint itself.
constexpr double kMidpointFloor = 1e-300;

float max_coeff(const float* x, Eigen::Index n) {
  float m = x[0];
#pragma omp simd reduction(max : m)
  for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

// Writes exp(x - max) into `out` and returns the sum.
double exp_shifted(const float* x, double max, double* out, Eigen::Index n) {
  double sum = 0.0;
#pragma omp simd reduction(+ : sum)
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = exp_kernel(static_cast<double>(x[i]) - max);
    sum += out[i];
  }
  return sum;
}

std::vector<double>& scratch(Eigen::Index n) {
  thread_local std::vector<double> buffer;
  if (buffer.size() < static_cast<std::size_t>(n)) buffer.resize(static_cast<std::size_t>(n));
  return buffer;
}

}  // namespace

namespace detail {
double exp_nonpositive(double x) noexcept { return exp_kernel(x); }
double log_positive(double x) noexcept { return log_kernel(x); }
}  // namespace detail

SoftmaxRow softmax_row(Eigen::Ref<const LogitsVector> logits) {
  const Eigen::Index n = logits.size();
  require(n > 0, Errc::invalid_argument, "softmax_row: empty logits");
  require(logits.allFinite(), Errc::invalid_argument, "softmax_row: non-finite logit");
  SoftmaxRow row;
  row.probs.resize(n);
  const double max = max_coeff(logits.data(), n);
  const double sum = exp_shifted(logits.data(), max, row.probs.data(), n);
  row.probs *= 1.0 / sum;
  row.log_normalizer = max + std::log(sum);
  return row;
}

double softmax_jsd(Eigen::Ref<const LogitsVector> anchor_logits, const SoftmaxRow& anchor,
                   Eigen::Ref<const LogitsVector> candidate_logits) {
  const Eigen::Index n = anchor_logits.size();
  require(candidate_logits.size() == n && anchor.probs.size() == n, Errc::invalid_argument,
          "softmax_jsd: length mismatch (" + std::to_string(n) + " vs " +
              std::to_string(candidate_logits.size()) + ")");
  if (n == 0) return 0.0;
  const float* a = anchor_logits.data();
  const float* x = candidate_logits.data();
  if (std::memcmp(a, x, static_cast<std::size_t>(n) * sizeof(float)) == 0) return 0.0;

  const double* p = anchor.probs.data();
  double* q = scratch(n).data();
  const double max = max_coeff(x, n);
  const double sum = exp_shifted(x, max, q, n);
  const double inv = 1.0 / sum;
  const double lse_q = max + std::log(sum);
  const double lse_p = anchor.log_normalizer;

  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double qi = q[i] * inv;
    const double mi = 0.5 * (p[i] + qi);
    const double lm = log_kernel(mi);
    const double lp = static_cast<double>(a[i]) - lse_p;
    const double lq = static_cast<double>(x[i]) - lse_q;
    const double term = p[i] * (lp - lm) + qi * (lq - lm);
    acc += mi > kMidpointFloor ? term : 0.0;
  }
  const double divergence = 0.5 * acc;
  require(std::isfinite(divergence) && std::isfinite(lse_q), Errc::invalid_argument,
          "softmax_jsd: non-finite candidate logit");
  return std::clamp(divergence, 0.0, std::numbers::ln2);
}

}  // namespace largepig
