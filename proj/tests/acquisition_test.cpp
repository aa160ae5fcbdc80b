#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "aspo/acquisition.hpp"
#include "aspo/error.hpp"
#include "fixtures.hpp"

using namespace aspo;
using aspo::test::SmallProblem;

namespace {

double monteCarloEi(double mean, double sd, double best, std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < draws; ++i) s += std::max(best - (mean + sd * n(rng)), 0.0);
  return s / static_cast<double>(draws);
}

}  // namespace

TEST(Acquisition, EiAtZeroGapIsDensityAtZero) {
  EXPECT_NEAR(expectedImprovement(1.0, 1.0, 1.0), 0.3989423, 1e-7);
  double mc = monteCarloEi(1.0, 1.0, 1.0, 1000000, 1);
  EXPECT_NEAR(expectedImprovement(1.0, 1.0, 1.0), mc, 0.01 * mc);
}

TEST(Acquisition, EiWithoutUncertaintyIsTheGain) {
  EXPECT_EQ(expectedImprovement(2.0, 0.0, 5.0), 3.0);
  EXPECT_EQ(expectedImprovement(6.0, 0.0, 5.0), 0.0);
}

TEST(Acquisition, EiFarTailIsTinyButNonNegative) {
  double ei = expectedImprovement(8.0, 1.0, 0.0);
  EXPECT_LT(ei, 1e-14);
  EXPECT_GE(ei, 0.0);
  // Mills-ratio bounds: phi(z)/z^2 * (1 - 3/z^2) < EI < phi(z)/z^2 for z = -8.
  double phi = std::exp(-32.0) / std::sqrt(2 * M_PI);
  EXPECT_LT(ei, phi / 64.0);
  EXPECT_GT(ei, phi / 64.0 * (1 - 3.0 / 64.0));
  for (double z = -40; z < 5; z += 0.25) EXPECT_GE(expectedImprovement(-z, 1.0, 0.0), 0.0);
}

TEST(Acquisition, EiIsContinuousAcrossTheTailSwitch) {
  double a = expectedImprovement(6.0 - 1e-9, 1.0, 0.0);
  double b = expectedImprovement(6.0 + 1e-9, 1.0, 0.0);
  // Across a 2e-9 step EI must drop by its slope Phi(-6) times the step and
  // by nothing more.
  double slope = 0.5 * std::erfc(6.0 / std::sqrt(2.0));
  EXPECT_NEAR(a - b, slope * 2e-9, 1e-3 * slope * 2e-9);
}

TEST(Acquisition, EiDerivativesMatchFiniteDifferences) {
  for (double mean : {-1.0, 0.0, 0.7, 2.5})
    for (double sd : {0.3, 1.0, 2.0}) {
      double dm = 0, ds = 0;
      expectedImprovement(mean, sd * sd, 0.5, &dm, &ds);
      const double h = 1e-6;
      double fdm = (expectedImprovement(mean + h, sd * sd, 0.5) - expectedImprovement(mean - h, sd * sd, 0.5)) / (2 * h);
      double fds = (expectedImprovement(mean, (sd + h) * (sd + h), 0.5) -
                    expectedImprovement(mean, (sd - h) * (sd - h), 0.5)) /
                   (2 * h);
      EXPECT_NEAR(dm, fdm, 1e-6);
      EXPECT_NEAR(ds, fds, 1e-6);
    }
}

TEST(Acquisition, EiIsTranslationConsistent) {
  SmallProblem p(1);
  std::vector<EncodedPoint> X;
  std::vector<double> y, shifted;
  for (const auto& c : p.evaluated) {
    X.push_back(encode(p.space, c));
    y.push_back(SmallProblem::objective(p.space, c));
    shifted.push_back(y.back() + 123.0);
  }
  GpFitOptions o;
  o.optimizeHyperparameters = false;
  auto a = GpModel::fit(p.space, X, y, KernelParams::defaults(p.space.encodedDim()), o);
  auto b = GpModel::fit(p.space, X, shifted, KernelParams::defaults(p.space.encodedDim()), o);
  double best = *std::min_element(y.begin(), y.end());
  for (std::uint64_t i = 0; i < p.space.cardinality(); i += 37) {
    auto x = encode(p.space, p.space.configurationAt(i));
    EXPECT_NEAR(expectedImprovement(a, x, best), expectedImprovement(b, x, best + 123.0), 1e-9);
  }
}

TEST(Acquisition, CoolingFactorExamples) {
  EXPECT_EQ(coolingFactor({1.0, 0.1}, 0), 1.0);
  EXPECT_EQ(coolingFactor({1.0, 0.0}, 57), 1.0);
  EXPECT_NEAR(coolingFactor({2.0, 0.1}, 10), 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(coolingFactor({2.0, 0.1}, 10), 0.73576, 1e-5);
  for (int t = 0; t < 50; ++t) EXPECT_LT(coolingFactor({1.0, 0.1}, t + 1), coolingFactor({1.0, 0.1}, t));
  EXPECT_THROW(coolingFactor({1.0, 0.1}, -1), Error);
  EXPECT_THROW((CoolingSchedule{0.0, 0.1}.validate()), Error);
  EXPECT_THROW((CoolingSchedule{1.0, -0.1}.validate()), Error);
}

TEST(Acquisition, CoolingCombinationExamples) {
  for (auto mode : {AcquisitionMode::PaperRatio, AcquisitionMode::Exponent}) {
    EXPECT_EQ(coolAcquisition(0.37, 1.0, 1.0, mode), 0.37);
    EXPECT_GT(coolAcquisition(1.0, 0.5, 0.8, mode), coolAcquisition(1.0, 2.0, 0.8, mode));
    EXPECT_TRUE(std::isfinite(coolAcquisition(1.0, 0.0, 0.8, mode)));
  }
  EXPECT_EQ(coolAcquisition(2.0, 0.0, 1.0, AcquisitionMode::PaperRatio), 2.0 / kCostFloor);
}

TEST(Acquisition, PaperRatioArgmaxIgnoresIteration) {
  SmallProblem p(2);
  std::vector<Configuration> cands;
  for (std::uint64_t i = 0; i < p.space.cardinality(); i += 11) cands.push_back(p.space.configurationAt(i));
  auto argmax = [&](std::size_t t) {
    p.ctx.iteration = t;
    std::size_t best = 0;
    double bv = -1;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      double v = alphaCool(p.ctx, p.space, cands[i]);
      if (v > bv) {
        bv = v;
        best = i;
      }
    }
    return best;
  };
  auto a0 = argmax(0);
  EXPECT_EQ(argmax(10), a0);
  EXPECT_EQ(argmax(100), a0);
}

TEST(Acquisition, ExponentModeWitnessFlips) {
  // alpha = (1, 2), cost = (1, 4).
  auto mode = AcquisitionMode::Exponent;
  CoolingSchedule s{1.0, 0.1, mode};
  double early0 = coolAcquisition(1, 1, coolingFactor(s, 0), mode);
  double early1 = coolAcquisition(2, 4, coolingFactor(s, 0), mode);
  double late0 = coolAcquisition(1, 1, coolingFactor(s, 1000), mode);
  double late1 = coolAcquisition(2, 4, coolingFactor(s, 1000), mode);
  EXPECT_GT(early0, early1);
  EXPECT_LT(late0, late1);
}

TEST(Acquisition, RelaxedGradientMatchesFiniteDifferences) {
  SmallProblem p(3);
  std::mt19937_64 rng(4);
  for (auto mode : {AcquisitionMode::PaperRatio, AcquisitionMode::Exponent}) {
    p.ctx.schedule.mode = mode;
    int checked = 0;
    for (int trial = 0; trial < 200 && checked < 30; ++trial) {
      Eigen::VectorXd x = aspo::test::uniformPoint(p.space.encodedDim(), rng) * 0.9 +
                          Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p.space.encodedDim()), 0.05);
      Eigen::VectorXd g;
      double f = alphaCoolRelaxed(p.ctx, x, &g);
      if (f < 1e-6) continue;
      const double h = 1e-7;
      bool ok = true;
      Eigen::VectorXd fd(x.size());
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        Eigen::VectorXd up = x, dn = x;
        up[k] += h;
        dn[k] -= h;
        double fu = alphaCoolRelaxed(p.ctx, up, nullptr), fl = alphaCoolRelaxed(p.ctx, dn, nullptr);
        double fwd = (fu - f) / h, bwd = (f - fl) / h;
        // Skip stencils that straddle a change of nearest checkpoint.
        if (std::abs(fwd - bwd) > 1e-3 * std::max(1.0, std::abs(fwd))) ok = false;
        fd[k] = (fu - fl) / (2 * h);
      }
      if (!ok) continue;
      ++checked;
      for (Eigen::Index k = 0; k < x.size(); ++k) EXPECT_NEAR(g[k], fd[k], 1e-4 * std::max(1.0, std::abs(fd[k])));
    }
    EXPECT_GE(checked, 10);
  }
}

TEST(Acquisition, PicksFavouredCategoryInUnconstrainedSpace) {
  ParameterSpace s({aspo::test::categorical("c", {"a", "b", "c"}, "a")});
  std::vector<EncodedPoint> X{encode(s, Configuration({0})), encode(s, Configuration({1})), encode(s, Configuration({2}))};
  std::vector<double> y{5.0, 1.0, 5.0};
  GpFitOptions o;
  o.optimizeHyperparameters = false;
  auto m = GpModel::fit(s, X, y, KernelParams::defaults(3), o);
  AcquisitionContext ctx;
  ctx.model = &m;
  ctx.bestFeasible = 3.0;
  auto r = maximizeAcquisition(ctx, s, unconstrained(s));
  EXPECT_EQ(r.config.level(0), 1u);
  EXPECT_FALSE(r.fallback);
}

TEST(Acquisition, ReturnsFeasibleUnevaluatedNearOptimum) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SmallProblem p(seed);
    auto r = maximizeAcquisition(p.ctx, p.space, p.tree, p.options(seed));
    EXPECT_TRUE(exactTree(p.tree, p.space, r.config));
    EXPECT_EQ(p.evaluatedSet.count(r.config), 0u);
    EXPECT_NEAR(r.value, alphaCool(p.ctx, p.space, r.config), 1e-12 * std::max(1.0, r.value));
    double best = p.enumeratedMaximum();
    EXPECT_LE(r.value, best + 1e-9 * std::max(1.0, best));
    if (r.value >= best - 1e-9 * std::max(1.0, best)) ++hits;
  }
  EXPECT_GE(hits, 9);
}

TEST(Acquisition, BoomReturnsAreAlwaysFeasible) {
  const auto& b = aspo::test::boom();
  auto starts = warmStartConfigs(b.space, b.tree, 0, 10);
  std::vector<EncodedPoint> X;
  std::vector<double> y;
  for (const auto& c : starts) {
    X.push_back(encode(b.space, c));
    y.push_back(static_cast<double>(b.model.cycles(c, "coremark")) / b.model.fmax(c, 0));
  }
  auto m = GpModel::fit(b.space, X, y, KernelParams::defaults(b.space.encodedDim()));
  AcquisitionContext ctx;
  ctx.model = &m;
  ctx.bestFeasible = *std::min_element(y.begin(), y.end());
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    AcquisitionOptions o;
    o.seed = seed;
    o.randomStarts = 4;
    auto r = maximizeAcquisition(ctx, b.space, b.tree, o);
    EXPECT_TRUE(exactTree(b.tree, b.space, r.config)) << seed;
  }
}

TEST(Acquisition, ExhaustedSpaceRaisesNoFeasibleCandidate) {
  ParameterSpace s({aspo::test::ordinal("a", {1, 2}, 1), aspo::test::ordinal("b", {1, 2}, 1)});
  auto tree = parseConstraints(R"({"all":[{"expr":"a > b"}]})", s);
  std::vector<EncodedPoint> X{encode(s, Configuration({0, 0})), encode(s, Configuration({1, 0}))};
  std::vector<double> y{1.0, 2.0};
  auto m = GpModel::fit(s, X, y, KernelParams::defaults(2));
  AcquisitionContext ctx;
  ctx.model = &m;
  ctx.bestFeasible = 2.0;
  AcquisitionOptions o;
  o.fallbackDraws = 1000;
  o.exclude = [](const Configuration& c) { return c == Configuration({1, 0}); };
  try {
    maximizeAcquisition(ctx, s, tree, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoFeasibleCandidate);
  }
}

TEST(Acquisition, ModeNamesRoundTrip) {
  for (auto m : {AcquisitionMode::PaperRatio, AcquisitionMode::Exponent})
    EXPECT_EQ(acquisitionModeFromString(toString(m)), m);
  EXPECT_THROW(acquisitionModeFromString("ratio"), Error);
}
