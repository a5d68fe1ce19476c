// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace largepig {

using TokenId = std::int32_t;
using LayerIndex = int;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Distribution over the vocabulary. All mixture math runs in double.
using ProbVector = Vector<double>;

/// Pre-softmax scores. Stored at trace precision (f32).
using LogitsVector = Vector<float>;

/// Non-negative attention mass over token positions.
using WeightVector = Vector<double>;

using TokenSeq = std::vector<TokenId>;

/// Tolerance for accepting externally supplied probability vectors.
inline constexpr double kProbSumTolerance = 1e-6;

}  // namespace largepig
