// Copyright 2026 The NFSIP Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nfsip/neural.h"

#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

namespace nfsip::neural {
namespace {

NetworkShape SmallShape() { return NetworkShape{3, {4, 5}, 2}; }

ParameterSet RandomParams(const NetworkShape& shape, std::uint64_t seed) {
  Rng rng = MakeRng(seed, 0);
  ParameterSet p = ParameterSet::Initialize(shape, rng);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (LayerTensors& layer : p.layers()) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = u(rng);
    for (Eigen::Index i = 0; i < layer.gain.size(); ++i) {
      layer.gain(i) = 1.0 + u(rng);
      layer.offset(i) = u(rng);
    }
  }
  return p;
}

// Forward pass written out scalar by scalar.
std::vector<double> ReferenceForward(const ParameterSet& p,
                                     std::vector<double> x) {
  const int layers = p.shape().num_layers();
  for (int l = 0; l < layers; ++l) {
    const LayerTensors& t = p.layers()[l];
    std::vector<double> z(t.weight.rows(), 0.0);
    for (int r = 0; r < t.weight.rows(); ++r) {
      z[r] = t.bias(r);
      for (int c = 0; c < t.weight.cols(); ++c) z[r] += t.weight(r, c) * x[c];
    }
    if (l == layers - 1) return z;
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= z.size();
    double var = 0.0;
    for (double v : z) var += (v - mean) * (v - mean);
    var /= z.size();
    x.assign(z.size(), 0.0);
    for (std::size_t r = 0; r < z.size(); ++r) {
      const double n = (z[r] - mean) / std::sqrt(var + kLayerNormEps);
      x[r] = std::max(0.0, t.gain(r) * n + t.offset(r));
    }
  }
  return x;
}

TEST(NetworkTest, ForwardMatchesScalarReference) {
  const ParameterSet p = RandomParams(SmallShape(), 3);
  const std::vector<double> input = {0.3, -1.2, 0.7};
  Vector x(3);
  x << 0.3, -1.2, 0.7;
  const Vector out = Predict(p, x);
  const std::vector<double> ref = ReferenceForward(p, input);
  ASSERT_EQ(out.size(), 2);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(out(i), ref[i], 1e-12);
}

TEST(NetworkTest, HandComputedTwoUnitLayer) {
  // One hidden layer of two units: layer norm of a two-vector maps it to
  // (+-1) * |d| / sqrt(d^2 + eps) where d is half the difference.
  ParameterSet p(NetworkShape{1, {2}, 1});
  p.layers()[0].weight << 1.0, -1.0;
  p.layers()[1].weight << 2.0, 3.0;
  p.layers()[1].bias << 0.5;
  Vector x(1);
  x << 2.0;
  const double h = 2.0 / std::sqrt(4.0 + kLayerNormEps);
  // Hidden after ReLU: (h, 0); output = 2 h + 0.5.
  EXPECT_NEAR(Predict(p, x)(0), 2.0 * h + 0.5, 1e-14);
}

TEST(NetworkTest, ZeroInitialisedNetworkOutputsBias) {
  ParameterSet p(SmallShape());
  p.layers().back().bias << 1.5, -2.0;
  const Vector out = Predict(p, Vector(Vector::Ones(3)));
  EXPECT_DOUBLE_EQ(out(0), 1.5);
  EXPECT_DOUBLE_EQ(out(1), -2.0);
}

TEST(NetworkTest, ForwardAndPredictAgreeBitwise) {
  const ParameterSet p = RandomParams(SmallShape(), 4);
  Matrix x = Matrix::Random(3, 6);
  const Matrix a = Forward(p, x).output;
  const Matrix b = Predict(p, x);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(NetworkTest, BatchColumnsAreIndependent) {
  const ParameterSet p = RandomParams(SmallShape(), 5);
  Matrix x = Matrix::Random(3, 4);
  const Matrix batch = Predict(p, x);
  for (int c = 0; c < 4; ++c) {
    const Vector single = Predict(p, Vector(x.col(c)));
    EXPECT_LT((batch.col(c) - single).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(NetworkTest, InitializationRespectsFanInBound) {
  Rng rng = MakeRng(9, 0);
  const ParameterSet p = ParameterSet::Initialize(NetworkShape{16, {32, 32}, 6}, rng);
  for (const LayerTensors& layer : p.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    EXPECT_LE(layer.weight.cwiseAbs().maxCoeff(), bound);
    EXPECT_EQ(layer.bias.cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_EQ(p.layers()[0].gain, Vector::Ones(32));
}

TEST(NetworkTest, RejectsWrongInputWidth) {
  const ParameterSet p(SmallShape());
  EXPECT_THROW(Predict(p, Vector(Vector::Zero(4))), std::invalid_argument);
}

TEST(NetworkTest, RejectsDegenerateShapes) {
  EXPECT_THROW(ParameterSet(NetworkShape{0, {4}, 2}), std::invalid_argument);
  EXPECT_THROW(ParameterSet(NetworkShape{3, {0}, 2}), std::invalid_argument);
}

TEST(BackwardTest, MatchesIndependentCentralDifferences) {
  const ParameterSet p = RandomParams(SmallShape(), 6);
  Matrix x = Matrix::Random(3, 5);
  Matrix w = Matrix::Random(2, 5);  // loss = sum(output .* w)
  const GradientSet analytic = Backward(p, Forward(p, x), w);

  ParameterSet probe = p;
  auto views = probe.Views();
  auto grads = analytic.Views();
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t t = 0; t < views.size(); ++t) {
    for (std::size_t i = 0; i < views[t].size(); ++i) {
      const double saved = views[t][i];
      views[t][i] = saved + h;
      const double up = (Predict(probe, x).array() * w.array()).sum();
      views[t][i] = saved - h;
      const double down = (Predict(probe, x).array() * w.array()).sum();
      views[t][i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(grads[t][i]), 1e-6});
      worst = std::max(worst, std::abs(numeric - grads[t][i]) / scale);
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(BackwardTest, DeadReluUnitsGetNoWeightGradient) {
  ParameterSet p(NetworkShape{1, {2}, 1});
  p.layers()[0].weight << 1.0, -1.0;
  p.layers()[1].weight << 1.0, 1.0;
  Vector x(1);
  x << 1.0;
  const GradientSet g = Backward(p, Forward(p, x), Matrix::Ones(1, 1));
  // Second hidden unit is negative after normalization: no gain gradient.
  EXPECT_EQ(g.layers()[0].gain(1), 0.0);
  EXPECT_EQ(g.layers()[1].weight(0, 1), 0.0);
}

TEST(BackwardTest, RejectsMismatchedTraceAndGradient) {
  const ParameterSet p(SmallShape());
  const ParameterSet other(NetworkShape{3, {4}, 2});
  const ForwardTrace trace = Forward(p, Vector(Vector::Zero(3)));
  EXPECT_THROW(Backward(other, trace, Matrix::Zero(2, 1)), std::invalid_argument);
  EXPECT_THROW(Backward(p, trace, Matrix::Zero(3, 1)), std::invalid_argument);
}

TEST(FiniteDifferenceTest, QuadraticInOneWeight) {
  ParameterSet p(NetworkShape{1, {1}, 1});
  p.layers()[1].weight(0, 0) = 3.0;
  auto loss = [](const ParameterSet& q) {
    const double w = q.layers()[1].weight(0, 0);
    return w * w;
  };
  const GradientSet g = FiniteDifferenceGradient(loss, p);
  EXPECT_NEAR(g.layers()[1].weight(0, 0), 6.0, 1e-8);
  EXPECT_NEAR(g.layers()[0].weight(0, 0), 0.0, 1e-12);
}

TEST(SoftmaxTest, SumsToOneAndIsShiftInvariant) {
  Vector logits(4);
  logits << 1.0, 2.0, -3.0, 0.5;
  const Vector p = Softmax(logits);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  const Vector q = Softmax(Vector(logits.array() + 1000.0));
  EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(p(1) / p(0), std::exp(1.0), 1e-12);
}

TEST(SoftmaxTest, LogSoftmaxIsStableForLargeLogits) {
  Vector logits(2);
  logits << 1000.0, 0.0;
  const Vector l = LogSoftmax(logits);
  EXPECT_TRUE(l.allFinite());
  EXPECT_NEAR(l(0), 0.0, 1e-15);
  EXPECT_NEAR(l(1), -1000.0, 1e-9);
}

TEST(LayerNormTest, ZeroMeanUnitVarianceWithIdentityAffine) {
  Vector x(4);
  x << 1.0, 2.0, 3.0, 10.0;
  const Vector y = LayerNorm(x, Vector::Ones(4), Vector::Zero(4));
  EXPECT_NEAR(y.mean(), 0.0, 1e-12);
  EXPECT_NEAR((y.array() * y.array()).mean(), 1.0, 1e-5);
}

TEST(LayerNormTest, ConstantInputMapsToOffset) {
  Vector offset(3);
  offset << 0.1, 0.2, 0.3;
  const Vector y = LayerNorm(Vector::Constant(3, 7.0), Vector::Ones(3), offset);
  EXPECT_LT((y - offset).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LayerNormTest, RejectsLengthMismatch) {
  EXPECT_THROW(LayerNorm(Vector::Zero(3), Vector::Ones(2), Vector::Zero(3)),
               std::invalid_argument);
}

TEST(OptimizerTest, SgdStepIsExact) {
  ParameterSet p = RandomParams(SmallShape(), 7);
  const ParameterSet before = p;
  GradientSet g = GradientSet::ZerosLike(p);
  g.layers()[0].weight(1, 2) = 2.0;
  g.layers()[2].bias(0) = -1.0;
  Optimizer opt(OptimizerConfig{OptimizerKind::kSgd}, p.shape());
  ASSERT_TRUE(opt.Step(p, g, 0.1));
  EXPECT_DOUBLE_EQ(p.layers()[0].weight(1, 2), before.layers()[0].weight(1, 2) - 0.2);
  EXPECT_DOUBLE_EQ(p.layers()[2].bias(0), before.layers()[2].bias(0) + 0.1);
  EXPECT_EQ(p.layers()[1].weight, before.layers()[1].weight);
}

TEST(OptimizerTest, AdamFirstStepHasLearningRateMagnitude) {
  ParameterSet p(SmallShape());
  GradientSet g = GradientSet::ZerosLike(p);
  g.layers()[0].weight(0, 0) = 5.0;
  g.layers()[0].weight(0, 1) = -0.01;
  Optimizer opt(OptimizerConfig{}, p.shape());
  ASSERT_TRUE(opt.Step(p, g, 1e-3));
  EXPECT_NEAR(p.layers()[0].weight(0, 0), -1e-3, 1e-9);
  EXPECT_NEAR(p.layers()[0].weight(0, 1), 1e-3, 1e-8);
  EXPECT_EQ(p.layers()[0].weight(1, 1), 0.0);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(OptimizerTest, NonFiniteGradientIsRejectedWithoutSideEffects) {
  ParameterSet p = RandomParams(SmallShape(), 8);
  const ParameterSet before = p;
  GradientSet g = GradientSet::ZerosLike(p);
  g.layers()[1].weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
  for (OptimizerKind kind : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
    Optimizer opt(OptimizerConfig{kind}, p.shape());
    EXPECT_FALSE(opt.Step(p, g, 0.1));
    EXPECT_EQ(opt.steps(), 0);
    for (std::size_t l = 0; l < p.layers().size(); ++l) {
      EXPECT_EQ(p.layers()[l].weight, before.layers()[l].weight);
    }
  }
}

TEST(OptimizerTest, NegativeLearningRateThrows) {
  ParameterSet p(SmallShape());
  Optimizer opt(OptimizerConfig{}, p.shape());
  EXPECT_THROW((void)opt.Step(p, GradientSet::ZerosLike(p), -1.0),
               std::invalid_argument);
}

TEST(OptimizerTest, ZeroGradientSgdLeavesParametersBitIdentical) {
  ParameterSet p = RandomParams(SmallShape(), 10);
  const ParameterSet before = p;
  Optimizer opt(OptimizerConfig{OptimizerKind::kSgd}, p.shape());
  ASSERT_TRUE(opt.Step(p, GradientSet::ZerosLike(p), 0.5));
  for (std::size_t l = 0; l < p.layers().size(); ++l) {
    EXPECT_EQ(p.layers()[l].weight, before.layers()[l].weight);
    EXPECT_EQ(p.layers()[l].bias, before.layers()[l].bias);
  }
}

TEST(CheckpointTest, RoundTripReproducesForwardOutputs) {
  const ParameterSet q = RandomParams(NetworkShape{6, {32, 32}, 4}, 11);
  const ParameterSet pi = RandomParams(NetworkShape{6, {32, 32}, 4}, 12);
  std::stringstream buf;
  WriteCheckpoint(buf, {{"q", &q}, {"policy", &pi}});
  const std::string text = buf.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "NFSIP-CKPT v1");
  EXPECT_NE(text.find("\nq.layer0.weight\n32 6\n"), std::string::npos);
  EXPECT_NE(text.find("\npolicy.layer2.bias\n4\n"), std::string::npos);

  const auto loaded = ReadCheckpoint(buf);
  ASSERT_EQ(loaded.size(), 2u);
  const ParameterSet& q2 = loaded.at("q");
  EXPECT_EQ(q2.shape(), q.shape());
  Rng rng = MakeRng(13, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(6);
    for (int i = 0; i < 6; ++i) x(i) = Uniform01(rng) * 4.0 - 2.0;
    EXPECT_LT((Predict(q2, x) - Predict(q, x)).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LT((Predict(loaded.at("policy"), x) - Predict(pi, x)).cwiseAbs().maxCoeff(),
              1e-7);
  }
}

TEST(CheckpointTest, ValuesHaveNineSignificantDigits) {
  ParameterSet p(NetworkShape{1, {1}, 1});
  p.layers()[1].bias(0) = 1.0 / 3.0;
  std::stringstream buf;
  WriteCheckpoint(buf, {{"q", &p}});
  EXPECT_NE(buf.str().find("\n3.33333333e-01\n"), std::string::npos);
}

TEST(CheckpointTest, RejectsMissingHeaderAndTruncation) {
  std::stringstream no_header("q.layer0.weight\n1 1\n0\n");
  EXPECT_THROW(ReadCheckpoint(no_header), std::runtime_error);
  std::stringstream truncated("NFSIP-CKPT v1\nq.layer0.weight\n2 2\n1.0\n");
  EXPECT_THROW(ReadCheckpoint(truncated), std::runtime_error);
}

}  // namespace
}  // namespace nfsip::neural
