// SPDX-License-Identifier: Apache-2.0
#include "largepig/prob.hpp"

#include "../support/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace largepig;

namespace {

ProbVector vec(std::initializer_list<double> v) {
  ProbVector p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

constexpr double kLn4Over3 = 0.28768207245178093;
constexpr double kHalfLn4Over3 = 0.14384103622589046;
constexpr double kJsdPointVsUniform = 0.21576155433883570;

}  // namespace

TEST(Softmax, UniformLogits) {
  const ProbVector p = softmax(Vector<double>::Zero(4));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(p[i], 0.25);
}

TEST(Softmax, TwoToOne) {
  const ProbVector p = softmax(vec({std::numbers::ln2, 0.0}));
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, SingleEntry) {
  const ProbVector p = softmax(vec({5.0}), 0.8);
  EXPECT_EQ(p.size(), 1);
  EXPECT_DOUBLE_EQ(p[0], 1.0);
}

TEST(Softmax, Rejects) {
  EXPECT_THROW(softmax(vec({1.0, 2.0}), 0.0), Error);
  EXPECT_THROW(softmax(vec({1.0, 2.0}), -1.0), Error);
  EXPECT_THROW(softmax(vec({1.0, std::numeric_limits<double>::quiet_NaN()})), Error);
  EXPECT_THROW(softmax(vec({1.0, std::numeric_limits<double>::infinity()})), Error);
  try {
    softmax(vec({1.0}), 0.0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_argument);
  }
}

TEST(Softmax, LargeMagnitudesStayFinite) {
  const ProbVector p = softmax(vec({1000.0, 999.0, -1000.0}));
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  EXPECT_NEAR(p[0] / p[1], std::exp(1.0), 1e-9);
}

TEST(Softmax, ValidAndShiftInvariantOnRandomInputs) {
  gen::Source s(11);
  for (int c = 0; c < 2000; ++c) {
    const auto n = static_cast<Eigen::Index>(1 + s.index(64));
    const LogitsVector x = gen::logits(s, n);
    const double t = s.uniform(0.05, 4.0);
    const double shift = s.uniform(-50.0, 50.0);
    const ProbVector p = softmax(x, t);
    ASSERT_TRUE(is_distribution(p, 1e-9));
    const ProbVector shifted = softmax((x.cast<double>().array() + shift).matrix(), t);
    ASSERT_LE((p - shifted).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(LogSoftmax, MatchesLogOfSoftmax) {
  gen::Source s(12);
  for (int c = 0; c < 200; ++c) {
    const LogitsVector x = gen::logits(s, 32);
    const ProbVector lp = log_softmax(x, 0.7);
    const ProbVector p = softmax(x, 0.7);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (p[i] > 1e-300) ASSERT_NEAR(lp[i], std::log(p[i]), 1e-9 * std::max(1.0, std::abs(lp[i])));
    }
  }
}

TEST(Kl, Examples) {
  EXPECT_DOUBLE_EQ(kl_divergence(vec({0.5, 0.5}), vec({0.5, 0.5})), 0.0);
  EXPECT_NEAR(kl_divergence(vec({1.0, 0.0}), vec({0.75, 0.25})), kLn4Over3, 1e-15);
  EXPECT_NEAR(kl_divergence(vec({0.5, 0.5}), vec({0.75, 0.25})), kHalfLn4Over3, 1e-15);
}

TEST(Kl, Errors) {
  try {
    kl_divergence(vec({0.5, 0.5}), vec({1.0, 0.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::divergence_undefined);
  }
  try {
    kl_divergence(vec({1.0}), vec({0.5, 0.5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_argument);
  }
  // Zero where p is zero is fine.
  EXPECT_NEAR(kl_divergence(vec({1.0, 0.0}), vec({1.0, 0.0})), 0.0, 0.0);
}

TEST(Jsd, Examples) {
  EXPECT_NEAR(jsd(vec({1.0, 0.0}), vec({0.5, 0.5})), kJsdPointVsUniform, 1e-15);
  EXPECT_NEAR(jsd(vec({1.0, 0.0}), vec({0.0, 1.0})), std::numbers::ln2, 1e-15);
  const ProbVector p = vec({0.1, 0.2, 0.7});
  EXPECT_EQ(jsd(p, p), 0.0);
  EXPECT_THROW(jsd(vec({1.0}), vec({0.5, 0.5})), Error);
}

TEST(Jsd, SymmetricBoundedAndZeroOnlyWhenEqual) {
  gen::Source s(13);
  for (int c = 0; c < 5000; ++c) {
    const auto n = static_cast<Eigen::Index>(1 + s.index(40));
    const ProbVector p = gen::prob(s, n, s.coin());
    ProbVector q = gen::prob(s, n, s.coin());
    if (s.coin(0.1)) q = p;
    const double d = jsd(p, q);
    ASSERT_NEAR(d, jsd(q, p), 1e-12);
    ASSERT_GE(d, 0.0);
    ASSERT_LE(d, std::numbers::ln2 + 1e-12);
    const double diff = (p - q).cwiseAbs().maxCoeff();
    if (diff <= 1e-12) {
      ASSERT_LE(d, 1e-12);
    } else if (diff > 1e-4) {
      ASSERT_GT(d, 0.0);
    }
  }
}

TEST(Jsd, DisjointSupportsReachLn2) {
  gen::Source s(14);
  for (int c = 0; c < 500; ++c) {
    const auto n = static_cast<Eigen::Index>(2 + s.index(30));
    ProbVector p = gen::prob(s, n);
    ProbVector q = gen::prob(s, n);
    for (Eigen::Index i = 0; i < n; ++i) (s.coin() ? p : q)[i] = 0.0;
    if (p.sum() == 0.0 || q.sum() == 0.0) continue;
    p /= p.sum();
    q /= q.sum();
    ASSERT_NEAR(jsd(p, q), std::numbers::ln2, 1e-12);
  }
}

TEST(NormalizeSpan, Examples) {
  EXPECT_TRUE(normalize_span(vec({0.2, 0.2})).isApprox(vec({0.5, 0.5})));
  const WeightVector w = normalize_span(vec({0.1, 0.3, 0.1}));
  EXPECT_NEAR(w[0], 0.2, 1e-15);
  EXPECT_NEAR(w[1], 0.6, 1e-15);
  EXPECT_NEAR(w[2], 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(normalize_span(vec({1.0}))[0], 1.0);
}

TEST(NormalizeSpan, DegenerateAndNegative) {
  try {
    normalize_span(vec({0.0, 0.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_span);
  }
  try {
    normalize_span(WeightVector(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_span);
  }
  try {
    normalize_span(vec({0.5, -0.1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_argument);
  }
}

TEST(NormalizeSpan, Idempotent) {
  gen::Source s(15);
  for (int c = 0; c < 2000; ++c) {
    const WeightVector w = gen::prob(s, static_cast<Eigen::Index>(1 + s.index(20)), true) * s.uniform(0.01, 100.0);
    const WeightVector once = normalize_span(w);
    ASSERT_NEAR(once.sum(), 1.0, 1e-9);
    ASSERT_LE((normalize_span(once) - once).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Distribution, Check) {
  EXPECT_TRUE(is_distribution(vec({0.25, 0.75})));
  EXPECT_FALSE(is_distribution(vec({0.5, 0.6})));
  EXPECT_FALSE(is_distribution(vec({1.5, -0.5})));
}
