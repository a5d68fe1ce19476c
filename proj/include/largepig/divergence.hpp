// SPDX-License-Identifier: Apache-2.0
//
// Fused softmax + Jensen-Shannon kernels for the per-token hot path.
//
// `jsd(softmax(a), softmax(b))` needs one exp and two logs per vocabulary
// entry; the fused form reuses the anchor's log-probabilities (a - lse) and
// the candidate's (b - lse_b) so only the midpoint logarithm is evaluated.
// The exp/log used here are branch-free polynomial kernels that the compiler
// vectorizes; both are accurate to a couple of ulp on the ranges they see.
#pragma once

#include "largepig/types.hpp"

#include <Eigen/Core>

namespace largepig {

/// Temperature-1 softmax of a logits row together with its log normalizer.
struct SoftmaxRow {
  ProbVector probs;
  double log_normalizer = 0.0;  ///< log sum exp(logits)
};

/// Computes `softmax(logits)` and its log normalizer with the vectorized
/// kernels. Throws invalid-argument on non-finite logits.
SoftmaxRow softmax_row(Eigen::Ref<const LogitsVector> logits);

/// Jensen-Shannon divergence between the softmax of `anchor_logits`
/// (pre-computed as `anchor`) and the softmax of `candidate_logits`.
///
/// Bit-identical logit rows short-circuit to exactly 0. Throws
/// invalid-argument on length mismatch or non-finite candidate logits.
double softmax_jsd(Eigen::Ref<const LogitsVector> anchor_logits, const SoftmaxRow& anchor,
                   Eigen::Ref<const LogitsVector> candidate_logits);

namespace detail {

/// exp(x) for x <= 0; results below 2^-1022 flush to zero.
double exp_nonpositive(double x) noexcept;
/// log(x) for positive normal x.
double log_positive(double x) noexcept;

}  // namespace detail
}  // namespace largepig
