#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "aspo/error.hpp"
#include "aspo/gp.hpp"
#include "support.hpp"

using namespace aspo;
using aspo::test::categorical;
using aspo::test::ordinal;
using aspo::test::uniformPoint;

namespace {

ParameterSpace mixed() {
  return ParameterSpace({categorical("c", {"a", "b", "c"}, "a"), ordinal("o", {1, 2, 3, 4, 5}, 1),
                         categorical("d", {"x", "y"}, "x"), ordinal("p", {1, 2, 4, 8}, 1)});
}

// Continuous space: ordinal coordinates with many ranks behave like reals.
ParameterSpace fine(std::size_t dims) {
  std::vector<ParameterDef> ps;
  std::vector<std::int64_t> values(1001);
  for (int i = 0; i <= 1000; ++i) values[i] = i;
  for (std::size_t d = 0; d < dims; ++d) ps.push_back(ordinal("x" + std::to_string(d), values, 0));
  return ParameterSpace(ps);
}

std::vector<EncodedPoint> snappedSample(const ParameterSpace& s, std::size_t n, std::mt19937_64& rng) {
  std::vector<EncodedPoint> out;
  while (out.size() < n) {
    EncodedPoint p = snap(s, EncodedPoint(uniformPoint(s.encodedDim(), rng)));
    bool dup = false;
    for (const auto& q : out) dup = dup || q == p;
    if (!dup) out.push_back(p);
  }
  return out;
}

GpFitOptions fixedHyper() {
  GpFitOptions o;
  o.optimizeHyperparameters = false;
  return o;
}

}  // namespace

TEST(Gp, KernelExamples) {
  auto s = mixed();
  auto p = KernelParams::defaults(s.encodedDim());
  p.signalVariance = 2.5;
  std::mt19937_64 rng(1);
  EncodedPoint x(uniformPoint(s.encodedDim(), rng));
  EXPECT_EQ(kernelValue(s, p, x, x), 2.5);

  ParameterSpace cat({categorical("c", {"a", "b", "c"}, "a")});
  auto pc = KernelParams::defaults(3);
  EncodedPoint a(Eigen::Vector3d(0.2, 0.7, 0.1)), b(Eigen::Vector3d(0.0, 1.0, 0.0));
  EXPECT_EQ(kernelValue(cat, pc, a, b), pc.signalVariance);
}

TEST(Gp, MaternAtUnitDistanceMatchesClosedForm) {
  const double r = 1.0;
  double expected = (1.0 + std::sqrt(5.0) * r + 5.0 / 3.0 * r * r) * std::exp(-std::sqrt(5.0) * r);
  EXPECT_NEAR(matern52(1.0), expected, 1e-15);
  EXPECT_NEAR(matern52(1.0), 0.52399, 1e-5);
  KernelParams p;
  p.lengthscales = Eigen::Vector2d(2.0, 1.0);
  // Scaled distance sqrt((2/2)^2 + 0) = 1.
  EXPECT_NEAR(maternArd52(p, Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 0)), expected, 1e-15);
}

TEST(Gp, KernelIsSymmetric) {
  auto s = mixed();
  auto p = KernelParams::defaults(s.encodedDim());
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    EncodedPoint x(uniformPoint(s.encodedDim(), rng)), y(uniformPoint(s.encodedDim(), rng));
    EXPECT_EQ(kernelValue(s, p, x, y), kernelValue(s, p, y, x));
  }
}

TEST(Gp, KernelRejectsDimensionMismatch) {
  auto s = mixed();
  auto p = KernelParams::defaults(s.encodedDim());
  EXPECT_THROW(kernelValue(s, p, EncodedPoint(Eigen::Vector2d(0, 0)), EncodedPoint(Eigen::Vector2d(0, 0))), Error);
}

TEST(Gp, GramMatricesArePositiveSemidefinite) {
  auto s = mixed();
  std::mt19937_64 rng(3);
  for (int set = 0; set < 50; ++set) {
    auto p = KernelParams::defaults(s.encodedDim());
    for (auto& l : p.lengthscales) l = std::exp(std::uniform_real_distribution<double>(-2, 1)(rng));
    std::vector<EncodedPoint> pts;
    for (int i = 0; i < 20; ++i) pts.emplace_back(uniformPoint(s.encodedDim(), rng));
    Eigen::MatrixXd K(20, 20);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) K(i, j) = kernelValue(s, p, pts[i], pts[j]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(Gp, LogMarginalLikelihoodGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 8, D = 3;
    Eigen::MatrixXd X(n, D);
    for (auto& v : X.reshaped()) v = u(rng);
    Eigen::VectorXd y(n);
    for (auto& v : y) v = u(rng) * 2 - 1;
    KernelParams p;
    p.lengthscales = Eigen::VectorXd(D);
    for (auto& l : p.lengthscales) l = 0.2 + u(rng);
    p.signalVariance = 0.5 + u(rng);
    p.noiseVariance = 1e-3 + 0.1 * u(rng);
    Eigen::VectorXd g;
    logMarginalLikelihood(X, y, p, {}, &g);
    ASSERT_EQ(g.size(), D + 2);
    const double h = 1e-6;
    for (int k = 0; k < D + 2; ++k) {
      auto shifted = [&](double delta) {
        KernelParams q = p;
        if (k < D) q.lengthscales[k] *= std::exp(delta);
        else if (k == D) q.signalVariance *= std::exp(delta);
        else q.noiseVariance *= std::exp(delta);
        return logMarginalLikelihood(X, y, q, {});
      };
      double fd = (shifted(h) - shifted(-h)) / (2 * h);
      EXPECT_NEAR(g[k], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "component " << k;
    }
  }
}

TEST(Gp, ConstantTargetsGiveConstantMean) {
  auto s = mixed();
  std::mt19937_64 rng(5);
  auto X = snappedSample(s, 6, rng);
  std::vector<double> y(6, 3.25);
  auto m = GpModel::fit(s, X, y, KernelParams::defaults(s.encodedDim()));
  for (int i = 0; i < 50; ++i) {
    auto pr = m.predict(EncodedPoint(uniformPoint(s.encodedDim(), rng)));
    EXPECT_NEAR(pr.mean, 3.25, 1e-9);
    EXPECT_LE(m.latentVariance(EncodedPoint(uniformPoint(s.encodedDim(), rng))), m.params().signalVariance + 1e-12);
  }
}

TEST(Gp, BeatsMeanPredictorOnSmoothFunction) {
  auto s = fine(3);
  std::mt19937_64 rng(6);
  auto f = [](const EncodedPoint& p) { return p[0] + p[1] + p[2]; };
  auto X = snappedSample(s, 20, rng);
  std::vector<double> y;
  for (const auto& x : X) y.push_back(f(x));
  auto m = GpModel::fit(s, X, y, KernelParams::defaults(s.encodedDim()));
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(y.size());
  double se = 0.0, seBase = 0.0;
  for (int i = 0; i < 50; ++i) {
    EncodedPoint q = snap(s, EncodedPoint(uniformPoint(3, rng)));
    double e = m.predict(q).mean - f(q);
    se += e * e;
    seBase += (ybar - f(q)) * (ybar - f(q));
  }
  EXPECT_LT(std::sqrt(se / 50), std::sqrt(seBase / 50));
}

TEST(Gp, NoiseFreeModelInterpolates) {
  auto s = mixed();
  std::mt19937_64 rng(7);
  auto X = snappedSample(s, 12, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < X.size(); ++i) y.push_back(std::sin(3.0 * static_cast<double>(i)) * 10.0 + 40.0);
  auto init = KernelParams::defaults(s.encodedDim());
  init.noiseVariance = 0.0;
  auto m = GpModel::fit(s, X, y, init);
  for (std::size_t i = 0; i < X.size(); ++i) {
    auto pr = m.predict(X[i]);
    EXPECT_NEAR(pr.mean, y[i], 1e-6);
    EXPECT_LE(pr.variance, 1e-6);
  }
}

TEST(Gp, SnapDuplicatesShareThePosterior) {
  auto s = mixed();
  std::mt19937_64 rng(8);
  auto X = snappedSample(s, 10, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < X.size(); ++i) y.push_back(static_cast<double>(i % 4));
  auto m = GpModel::fit(s, X, y, KernelParams::defaults(s.encodedDim()));
  for (int t = 0; t < 2000; ++t) {
    Eigen::VectorXd raw = uniformPoint(s.encodedDim(), rng);
    EncodedPoint x(raw);
    auto a = m.predict(x);
    auto b = m.predict(snap(s, x));
    ASSERT_EQ(a.mean, b.mean);
    ASSERT_EQ(a.variance, b.variance);
  }
  for (const auto& x : X) {
    // Perturb inside the snap cell of a training input.
    Eigen::VectorXd c = x.coords();
    for (std::size_t blk = 0; blk < s.paramCount(); ++blk) {
      auto off = static_cast<Eigen::Index>(s.offset(blk));
      if (s.param(blk).kind == ParamKind::Categorical) {
        for (std::size_t k = 0; k < s.width(blk); ++k) {
          auto i = off + static_cast<Eigen::Index>(k);
          c[i] = c[i] > 0.5 ? 0.9 : 0.1;
        }
      } else {
        double step = 0.2 / static_cast<double>(s.param(blk).levelCount() - 1);
        c[off] = std::clamp(c[off] + (c[off] < 0.5 ? step : -step), 0.0, 1.0);
      }
    }
    EncodedPoint near(c);
    ASSERT_EQ(snap(s, near), x);
    EXPECT_LE(m.latentVariance(near), m.params().noiseVariance + 10 * m.params().jitter);
    EXPECT_EQ(m.predict(near).mean, m.predict(x).mean);
  }
}

TEST(Gp, PriorIsRecoveredFarFromData) {
  auto s = fine(2);
  EncodedPoint origin(Eigen::Vector2d(0, 0));
  std::vector<EncodedPoint> X{origin, origin};
  std::vector<double> y{4.0, 4.0};
  auto init = KernelParams::defaults(2);
  init.lengthscales.setConstant(0.01);
  auto m = GpModel::fit(s, X, y, init, fixedHyper());
  ASSERT_EQ(m.size(), 1u);
  EncodedPoint far(Eigen::Vector2d(1, 1));
  EXPECT_NEAR(m.latentVariance(far), init.signalVariance, 0.01 * init.signalVariance);
  EXPECT_NEAR(m.predict(far).mean, m.targetMean(), 1e-9);
}

TEST(Gp, CholeskyFactorReproducesGram) {
  auto s = mixed();
  std::mt19937_64 rng(9);
  auto X = snappedSample(s, 15, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < X.size(); ++i) y.push_back(std::cos(static_cast<double>(i)));
  auto m = GpModel::fit(s, X, y, KernelParams::defaults(s.encodedDim()));
  Eigen::MatrixXd LLt = m.choleskyFactor() * m.choleskyFactor().transpose();
  EXPECT_LE((LLt - m.gram()).cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index i = 0; i < m.trainingInputs().rows(); ++i) {
    Eigen::VectorXd row = m.trainingInputs().row(i).transpose();
    EXPECT_EQ(snap(s, row), row);
  }
}

TEST(Gp, DuplicatesAreMerged) {
  auto s = mixed();
  std::mt19937_64 rng(10);
  auto X = snappedSample(s, 5, rng);
  std::vector<EncodedPoint> inputs = X;
  inputs.push_back(X[0]);
  std::vector<double> y{1, 2, 3, 4, 5, 3};
  auto m = GpModel::fit(s, inputs, y, KernelParams::defaults(s.encodedDim()));
  EXPECT_EQ(m.size(), 5u);
  EXPECT_GT(m.extraNoise()[0], 0.0);
}

TEST(Gp, AddingDataNeverIncreasesVariance) {
  auto s = mixed();
  std::mt19937_64 rng(11);
  for (int inst = 0; inst < 30; ++inst) {
    auto X = snappedSample(s, 9, rng);
    std::vector<double> y;
    for (std::size_t i = 0; i < X.size(); ++i) y.push_back(std::uniform_real_distribution<double>(0, 1)(rng));
    auto init = KernelParams::defaults(s.encodedDim());
    auto small = GpModel::fit(s, std::span(X).first(8), std::span(y).first(8), init, fixedHyper());
    auto big = GpModel::fit(s, X, y, init, fixedHyper());
    for (int q = 0; q < 20; ++q) {
      EncodedPoint x(uniformPoint(s.encodedDim(), rng));
      EXPECT_LE(big.latentVariance(x), small.latentVariance(x) + 1e-9);
      EXPECT_GE(big.latentVariance(x), 0.0);
    }
  }
}

TEST(Gp, FitIsDeterministicAndRoundTripsThroughJson) {
  auto s = mixed();
  std::mt19937_64 rng(12);
  auto X = snappedSample(s, 10, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < X.size(); ++i) y.push_back(static_cast<double>(i * i));
  GpFitOptions o;
  o.seed = 42;
  auto a = GpModel::fit(s, X, y, KernelParams::defaults(s.encodedDim()), o);
  auto b = GpModel::fit(s, X, y, KernelParams::defaults(s.encodedDim()), o);
  EXPECT_EQ(a.toJson(), b.toJson());
  auto c = GpModel::fromJson(a.toJson(), s);
  EncodedPoint q(uniformPoint(s.encodedDim(), rng));
  EXPECT_NEAR(c.predict(q).mean, a.predict(q).mean, 1e-12);
  EXPECT_NEAR(c.predict(q).variance, a.predict(q).variance, 1e-12);
}

TEST(Gp, FitRejectsBadInputs) {
  auto s = mixed();
  std::mt19937_64 rng(13);
  auto X = snappedSample(s, 3, rng);
  std::vector<double> y{1, 2, 3};
  EXPECT_THROW(GpModel::fit(s, std::span(X).first(1), std::span(y).first(1), KernelParams::defaults(s.encodedDim())),
               Error);
  EXPECT_THROW(GpModel::fit(s, X, std::span(y).first(2), KernelParams::defaults(s.encodedDim())), Error);
  EXPECT_THROW(GpModel::fit(s, X, y, KernelParams::defaults(2)), Error);
  auto bad = KernelParams::defaults(s.encodedDim());
  bad.signalVariance = -1;
  EXPECT_THROW(GpModel::fit(s, X, y, bad), Error);
}

TEST(Gp, RelaxedPredictionGradientsMatchFiniteDifferences) {
  auto s = fine(3);
  std::mt19937_64 rng(14);
  auto X = snappedSample(s, 12, rng);
  std::vector<double> y;
  for (const auto& x : X) y.push_back(std::sin(4 * x[0]) + x[1] * x[2]);
  auto m = GpModel::fit(s, X, y, KernelParams::defaults(3));
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd x = uniformPoint(3, rng) * 0.8 + Eigen::VectorXd::Constant(3, 0.1);
    Eigen::VectorXd dm, dv;
    m.predictRelaxed(x, &dm, &dv);
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-6;
      Eigen::VectorXd up = x, dn = x;
      up[k] += h;
      dn[k] -= h;
      auto pu = m.predictRelaxed(up), pd = m.predictRelaxed(dn);
      double fdm = (pu.mean - pd.mean) / (2 * h), fdv = (pu.variance - pd.variance) / (2 * h);
      EXPECT_NEAR(dm[k], fdm, 1e-4 * std::max(1.0, std::abs(fdm)));
      EXPECT_NEAR(dv[k], fdv, 1e-4 * std::max(1.0, std::abs(fdv)));
    }
  }
}
