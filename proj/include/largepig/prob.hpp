// SPDX-License-Identifier: Apache-2.0
//
// Probability-vector primitives. Everything here is a free function over
// Eigen dense expressions; inputs may be any column-vector expression and
// arithmetic is carried out in double regardless of the input scalar.
#pragma once

#include "largepig/error.hpp"
#include "largepig/types.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace largepig {

/// Softmax of `logits / temperature`, stabilized by subtracting the maximum.
template <typename Derived>
ProbVector softmax(const Eigen::MatrixBase<Derived>& logits, double temperature = 1.0) {
  require(temperature > 0.0 && std::isfinite(temperature), Errc::invalid_argument,
          "softmax: temperature must be positive and finite");
  require(logits.size() > 0, Errc::invalid_argument, "softmax: empty logits");
  const ProbVector x = logits.template cast<double>();
  require(x.allFinite(), Errc::invalid_argument, "softmax: non-finite logit");
  ProbVector out = ((x.array() - x.maxCoeff()) / temperature).exp().matrix();
  out /= out.sum();
  return out;
}

/// Log-softmax with the same stabilization as `softmax`.
template <typename Derived>
ProbVector log_softmax(const Eigen::MatrixBase<Derived>& logits, double temperature = 1.0) {
  require(temperature > 0.0 && std::isfinite(temperature), Errc::invalid_argument,
          "log_softmax: temperature must be positive and finite");
  require(logits.size() > 0, Errc::invalid_argument, "log_softmax: empty logits");
  const ProbVector x = logits.template cast<double>();
  require(x.allFinite(), Errc::invalid_argument, "log_softmax: non-finite logit");
  const Eigen::ArrayXd shifted = (x.array() - x.maxCoeff()) / temperature;
  return (shifted - std::log(shifted.exp().sum())).matrix();
}

/// True when every entry is finite and non-negative and the entries sum to
/// one within `tol`.
template <typename Derived>
bool is_distribution(const Eigen::MatrixBase<Derived>& p, double tol = kProbSumTolerance) {
  if (p.size() == 0) return false;
  const ProbVector x = p.template cast<double>();
  return x.allFinite() && x.minCoeff() >= 0.0 && std::abs(x.sum() - 1.0) <= tol;
}

/// Kullback-Leibler divergence KL(p || q), natural log, with 0 * ln 0 = 0.
template <typename DerivedP, typename DerivedQ>
double kl_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  require(p.size() == q.size(), Errc::invalid_argument,
          "kl_divergence: length mismatch (" + std::to_string(p.size()) + " vs " +
              std::to_string(q.size()) + ")");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = static_cast<double>(p[i]);
    if (pi <= 0.0) continue;
    const double qi = static_cast<double>(q[i]);
    if (qi <= 0.0) {
      fail(Errc::divergence_undefined,
           "kl_divergence: q[" + std::to_string(i) + "] = 0 where p > 0");
    }
    sum += pi * std::log(pi / qi);
  }
  return sum;
}

/// Jensen-Shannon divergence, natural log; lies in [0, ln 2].
template <typename DerivedP, typename DerivedQ>
double jsd(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  require(p.size() == q.size(), Errc::invalid_argument,
          "jsd: length mismatch (" + std::to_string(p.size()) + " vs " +
              std::to_string(q.size()) + ")");
  // The midpoint is positive wherever either side is, so neither KL term can
  // be undefined; accumulate both terms in one pass.
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = static_cast<double>(p[i]);
    const double qi = static_cast<double>(q[i]);
    const double mi = 0.5 * (pi + qi);
    if (pi > 0.0) sum += pi * std::log(pi / mi);
    if (qi > 0.0) sum += qi * std::log(qi / mi);
  }
  return std::clamp(0.5 * sum, 0.0, std::numbers::ln2);
}

/// Rescales a non-negative weight span to unit sum.
template <typename Derived>
Vector<typename Derived::Scalar> normalize_span(const Eigen::MatrixBase<Derived>& weights) {
  using Scalar = typename Derived::Scalar;
  require(weights.size() > 0, Errc::degenerate_span, "normalize_span: empty span");
  require(weights.allFinite() && weights.minCoeff() >= Scalar(0), Errc::invalid_argument,
          "normalize_span: weights must be finite and non-negative");
  const Scalar total = weights.sum();
  require(total > Scalar(0), Errc::degenerate_span, "normalize_span: span has zero mass");
  return weights / total;
}

}  // namespace largepig
