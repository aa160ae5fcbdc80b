#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "aspo/constraints.hpp"
#include "aspo/error.hpp"
#include "support.hpp"

using namespace aspo;

namespace {

const ParameterSpace& space() { return aspo::test::boom().space; }
std::size_t idx(const char* name) { return *space().indexOf(name); }

ConstraintTree parse(const std::string& text) { return parseConstraints(text, space()); }

std::vector<double> valuesWith(std::initializer_list<std::pair<const char*, double>> set) {
  auto v = space().numericValues(space().defaults());
  for (auto [name, value] : set) v[idx(name)] = value;
  return v;
}

const InequalityConstraint& onlyIneq(const ConstraintTree& t) {
  return std::get<InequalityConstraint>(t.root.children.at(0).node);
}

}  // namespace

TEST(Constraints, ParsesInequalityExpression) {
  auto t = parse(R"({"all":[{"expr":"FetchWidth >= DecodeWidth"}]})");
  ASSERT_EQ(t.leafCount(), 1u);
  const auto& c = onlyIneq(t);
  EXPECT_EQ(c.ka, 1.0);
  EXPECT_EQ(c.kb, 1.0);
  EXPECT_EQ(c.t, 0.0);
  EXPECT_EQ(c.xa, idx("FetchWidth"));
  EXPECT_EQ(c.xb, idx("DecodeWidth"));
}

TEST(Constraints, ParsesStructuredInequality) {
  auto t = parse(R"({"all":[{"ineq":{"ka":2,"xa":"FetchWidth","kb":1,"xb":"DecodeWidth","t":-1}}]})");
  const auto& c = onlyIneq(t);
  EXPECT_EQ(c.ka, 2.0);
  EXPECT_EQ(c.t, -1.0);
}

TEST(Constraints, ParsesDcacheRuleAsDisjunctionOfConditionals) {
  auto t = parse(R"({"all":[{"any":[
      {"cond":{"if":{"param":"dcache_nWays","in":[16,32]},"then":{"param":"dcache_nSets","in":[2,4]}}},
      {"cond":{"if":{"param":"dcache_nWays","in":[128,256]},"then":{"param":"dcache_nSets","in":[4,8]}}}]}]})");
  const auto& d = std::get<Disjunction>(t.root.children.at(0).node);
  ASSERT_EQ(d.children.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<ConditionalConstraint>(d.children[0].node));
  EXPECT_TRUE(std::holds_alternative<ConditionalConstraint>(d.children[1].node));
}

TEST(Constraints, ParsesDivisibility) {
  auto t = parse(R"({"all":[{"expr":"RobEntry %| DecodeWidth"}]})");
  const auto& d = std::get<DivisibilityConstraint>(t.root.children.at(0).node);
  EXPECT_EQ(d.xa, idx("RobEntry"));
  EXPECT_EQ(d.xb, idx("DecodeWidth"));
}

TEST(Constraints, SyntaxErrorCarriesLineAndColumn) {
  try {
    parse("{\"all\": [\n  {\"expr\": \"FetchWidth >= DecodeWidth\"},\n  oops\n]}");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 3u);
  }
}

TEST(Constraints, RejectsUnknownAndCategoricalParameters) {
  try {
    parse(R"({"all":[{"expr":"FetchWidth >= Nope"}]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownParameter);
  }
  try {
    parse(R"({"all":[{"expr":"bpd_config >= DecodeWidth"}]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TypeMismatch);
  }
  EXPECT_THROW(parse(R"({"all":[{"any":[]}]})"), ParseError);
  EXPECT_THROW(parse(R"({"any":[]})"), ParseError);
  EXPECT_THROW(parse(R"({"all":[{"expr":"FetchWidth ~ DecodeWidth"}]})"), ParseError);
}

TEST(Constraints, SmoothInequalityExamples) {
  InequalityConstraint c{1, idx("FetchWidth"), 1, idx("DecodeWidth"), 0};
  EXPECT_EQ(smoothInequality(c, valuesWith({{"FetchWidth", 4}, {"DecodeWidth", 2}})), 2.0);
  EXPECT_EQ(smoothInequality(c, valuesWith({{"FetchWidth", 1}, {"DecodeWidth", 1}})), 0.0);
  InequalityConstraint strict{1, idx("FetchBufferEntry"), 1, idx("FetchWidth"), -1};
  EXPECT_EQ(smoothInequality(strict, valuesWith({{"FetchBufferEntry", 8}, {"FetchWidth", 8}})), -1.0);
}

TEST(Constraints, StrictInequalityAgreesWithIntegerCheckOnAllPairs) {
  auto t = parse(R"({"all":[{"expr":"FetchBufferEntry > FetchWidth"}]})");
  const auto& fbe = space().param(idx("FetchBufferEntry"));
  const auto& fw = space().param(idx("FetchWidth"));
  for (std::size_t a = 0; a < fbe.levelCount(); ++a)
    for (std::size_t b = 0; b < fw.levelCount(); ++b) {
      auto v = valuesWith({{"FetchBufferEntry", fbe.numeric(a)}, {"FetchWidth", fw.numeric(b)}});
      bool truth = std::get<std::int64_t>(fbe.values[a]) > std::get<std::int64_t>(fw.values[b]);
      EXPECT_EQ(smoothTree(t, v) >= 0.0, truth);
      EXPECT_EQ(exactTree(t, v), truth);
    }
}

TEST(Constraints, IntervalAtomExamples) {
  IntervalAtom a{0, 2, 4};
  EXPECT_EQ(smoothIntervalAtom(a, 3), 1.0);
  EXPECT_EQ(smoothIntervalAtom(a, 2), 0.0);
  EXPECT_EQ(smoothIntervalAtom(a, 5), -3.0);
}

TEST(Constraints, DivisibilityExamples) {
  EXPECT_NEAR(divisibilityValue(4, 2), 0.0, 1e-15);
  EXPECT_NEAR(divisibilityValue(3, 2), -1.0, 1e-15);
  try {
    divisibilityValue(3, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Domain);
  }
}

TEST(Constraints, DivisibilityIsPeriodicInNumerator) {
  for (int b = 1; b <= 12; ++b)
    for (int a = 1; a <= 40; ++a) EXPECT_NEAR(divisibilityValue(a, b), divisibilityValue(a + b, b), 1e-12);
}

TEST(Constraints, DcacheDisjunctionSignMatchesBruteForce) {
  auto t = parse(R"({"all":[{"any":[
      {"cond":{"if":{"param":"dcache_nWays","in":[16,32]},"then":{"param":"dcache_nSets","in":[2,4]}}},
      {"cond":{"if":{"param":"dcache_nWays","in":[128,256]},"then":{"param":"dcache_nSets","in":[4,8]}}}]}]})");
  EXPECT_GT(smoothTree(t, valuesWith({{"dcache_nWays", 16}, {"dcache_nSets", 4}})), 0.0);
  const auto& ways = space().param(idx("dcache_nWays"));
  const auto& sets = space().param(idx("dcache_nSets"));
  for (std::size_t w = 0; w < ways.levelCount(); ++w)
    for (std::size_t s = 0; s < sets.levelCount(); ++s) {
      double nw = ways.numeric(w), ns = sets.numeric(s);
      bool first = !(nw >= 16 && nw <= 32) || (ns >= 2 && ns <= 4);
      bool second = !(nw >= 128 && nw <= 256) || (ns >= 4 && ns <= 8);
      auto v = valuesWith({{"dcache_nWays", nw}, {"dcache_nSets", ns}});
      EXPECT_EQ(smoothTree(t, v) >= 0.0, first || second) << nw << "," << ns;
    }
}

TEST(Constraints, BoomDefaultSatisfiesBundledConstraints) {
  const auto& p = aspo::test::boom();
  EXPECT_TRUE(exactTree(p.tree, p.space, p.space.defaults()));
  EXPECT_GE(smoothTree(p.tree, p.space.numericValues(p.space.defaults())), 0.0);
}

TEST(Constraints, ExactTreeExamples) {
  auto t = parse(R"({"all":[{"expr":"FetchWidth >= DecodeWidth"}]})");
  EXPECT_FALSE(exactTree(t, valuesWith({{"FetchWidth", 1}, {"DecodeWidth", 4}})));
  auto cond = parse(
      R"({"all":[{"cond":{"if":{"param":"icache_nWays","in":[64,128]},"then":{"param":"icache_nSets","in":[2,4]}}}]})");
  EXPECT_TRUE(exactTree(cond, valuesWith({{"icache_nWays", 4}, {"icache_nSets", 64}})));
  EXPECT_FALSE(exactTree(cond, valuesWith({{"icache_nWays", 64}, {"icache_nSets", 64}})));
}

TEST(Constraints, EmptyTreeIsAlwaysSatisfied) {
  auto t = unconstrained(space());
  auto v = space().numericValues(space().defaults());
  EXPECT_TRUE(exactTree(t, v));
  EXPECT_GT(smoothTree(t, v), 0.0);
}

TEST(Constraints, GradientExamples) {
  auto t = parse(R"({"all":[{"ineq":{"ka":2,"xa":"FetchWidth","kb":3,"xb":"DecodeWidth"}}]})");
  auto g = smoothGradient(t, valuesWith({}));
  EXPECT_EQ(g[idx("FetchWidth")], 2.0);
  EXPECT_EQ(g[idx("DecodeWidth")], -3.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (i != idx("FetchWidth") && i != idx("DecodeWidth")) { EXPECT_EQ(g[i], 0.0); }

  auto div = parse(R"({"all":[{"expr":"RobEntry %| DecodeWidth"}]})");
  auto v = valuesWith({{"RobEntry", 5}, {"DecodeWidth", 2}});
  auto gd = smoothGradient(div, v);
  const double h = 1e-6;
  for (const char* name : {"RobEntry", "DecodeWidth"}) {
    auto up = v, dn = v;
    up[idx(name)] += h;
    dn[idx(name)] -= h;
    double fd = (smoothTree(div, up) - smoothTree(div, dn)) / (2 * h);
    EXPECT_NEAR(gd[idx(name)], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Constraints, IntervalAtomDerivativeVanishesAtVertex) {
  auto t = parse(
      R"({"all":[{"cond":{"if":{"param":"icache_nWays","in":[1,100]},"then":{"param":"icache_nSets","in":[2,4]}}}]})");
  // Condition holds strongly, so the consequence atom attains the minimum at v=3.
  auto g = smoothGradient(t, valuesWith({{"icache_nWays", 50}, {"icache_nSets", 3}}));
  EXPECT_EQ(g[idx("icache_nSets")], 0.0);
}

TEST(Constraints, GradientMatchesFiniteDifferencesAwayFromKinks) {
  const auto& p = aspo::test::boom();
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; checked < 1000 && trial < 20000; ++trial) {
    std::vector<double> v(p.space.paramCount());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& d = p.space.param(i);
      if (d.kind == ParamKind::Categorical) {
        v[i] = 0.0;
        continue;
      }
      std::uniform_real_distribution<double> u(d.numeric(0), d.numeric(d.levelCount() - 1));
      v[i] = u(rng);
    }
    auto g = smoothGradient(p.tree, v);
    const double h = 1e-6;
    bool kink = false;
    std::vector<double> fd(v.size());
    double f0 = smoothTree(p.tree, v);
    for (std::size_t i = 0; i < v.size() && !kink; ++i) {
      auto up = v, dn = v;
      up[i] += h;
      dn[i] -= h;
      double fu = smoothTree(p.tree, up), fl = smoothTree(p.tree, dn);
      double fwd = (fu - f0) / h, bwd = (f0 - fl) / h;
      // One-sided slopes that disagree mark a min/max switch inside the stencil.
      if (std::abs(fwd - bwd) > 1e-3 * std::max(1.0, std::abs(fwd))) kink = true;
      fd[i] = (fu - fl) / (2 * h);
    }
    if (kink) continue;
    ++checked;
    for (std::size_t i = 0; i < v.size(); ++i)
      ASSERT_NEAR(g[i], fd[i], 1e-4 * std::max(1.0, std::abs(fd[i]))) << "param " << i;
  }
  EXPECT_EQ(checked, 1000);
}

TEST(Constraints, AddingChildrenIsMonotone) {
  const auto& p = aspo::test::boom();
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    auto cfg = p.space.configurationAt(std::uniform_int_distribution<std::uint64_t>(0, p.space.cardinality() - 1)(rng));
    auto v = p.space.numericValues(cfg);
    ConstraintTree conj;
    conj.paramCount = p.tree.paramCount;
    ConstraintTree disj = conj;
    Disjunction any;
    disj.root.children.push_back({any});
    double prevConj = smoothTree(conj, v);
    for (const auto& child : p.tree.root.children) {
      conj.root.children.push_back(child);
      double c = smoothTree(conj, v);
      EXPECT_LE(c, prevConj);
      prevConj = c;
      auto& d = std::get<Disjunction>(disj.root.children[0].node);
      double before = d.children.empty() ? -INFINITY : smoothTree(disj, v);
      d.children.push_back(child);
      EXPECT_GE(smoothTree(disj, v), before);
    }
  }
}

TEST(Constraints, SignAgreementOnSampledBoomConfigurations) {
  const auto& p = aspo::test::boom();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> pick(0, p.space.cardinality() - 1);
  for (int i = 0; i < 100000; ++i) {
    auto cfg = p.space.configurationAt(pick(rng));
    auto v = p.space.numericValues(cfg);
    ASSERT_EQ(smoothTree(p.tree, v) >= 0.0, exactTree(p.tree, v));
  }
}

TEST(Constraints, DimensionMismatchIsReported) {
  const auto& p = aspo::test::boom();
  std::vector<double> v(3, 1.0);
  try {
    smoothTree(p.tree, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}
