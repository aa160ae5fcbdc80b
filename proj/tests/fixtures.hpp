#pragma once

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "aspo/acquisition.hpp"
#include "aspo/checkpoint_store.hpp"
#include "aspo/constraints.hpp"
#include "aspo/gp.hpp"
#include "aspo/warm_start.hpp"
#include "support.hpp"

namespace aspo::test {

inline CheckpointRecord record(const ParameterSpace& s, const Configuration& c, double minutes = 10.0) {
  CheckpointRecord r;
  r.config = c;
  r.encoded = encode(s, c);
  r.metrics.cycles = 1000;
  r.metrics.fmaxMHz = 50.0;
  r.metrics.luts = 100;
  r.metrics.evalMinutes = minutes;
  r.metrics.synthesisMinutes = minutes;
  r.artifact = "checkpoint-" + configurationDigest(s, c);
  r.synthesisMinutes = minutes;
  return r;
}

/// 2160-configuration space with inequality, divisibility and conditional
/// constraints, a fitted surrogate and a distance-based cost.
struct SmallProblem {
  ParameterSpace space;
  ConstraintTree tree;
  std::vector<Configuration> evaluated;
  std::set<Configuration> evaluatedSet;
  GpModel model;
  CheckpointStore db;
  DistanceWeights weights;
  AcquisitionContext ctx;

  static double objective(const ParameterSpace& s, const Configuration& c) {
    auto v = s.numericValues(c);
    double cat[] = {0.0, 0.7, 0.3};
    return 2.0 + 0.3 * (v[0] - 4) * (v[0] - 4) + 0.5 * (v[1] - 2) * (v[1] - 2) + cat[c.level(2)] +
           0.4 * std::log2(v[3]) + 0.2 * (v[4] - 3) * (v[4] - 3);
  }

  explicit SmallProblem(std::uint64_t seed, std::size_t iteration = 3)
      : space({ordinal("a", {1, 2, 3, 4, 5, 6}, 6), ordinal("b", {1, 2, 3, 4, 5, 6}, 1),
               categorical("c", {"x", "y", "z"}, "x"), ordinal("d", {2, 4, 8, 16}, 16),
               ordinal("e", {1, 2, 3, 4, 5}, 1)}),
        tree(parseConstraints(R"({"all":[
            {"expr":"a >= b"},
            {"expr":"d %| b"},
            {"cond":{"if":{"param":"e","in":[4,5]},"then":{"param":"a","in":[1,3]}}}]})",
                              space)),
        db(space) {
    evaluated = warmStartConfigs(space, tree, seed, 6);
    std::mt19937_64 rng(seed + 99);
    while (evaluated.size() < 10) {
      auto c = randomConfiguration(space, rng);
      if (exactTree(tree, space, c) && std::find(evaluated.begin(), evaluated.end(), c) == evaluated.end())
        evaluated.push_back(c);
    }
    std::vector<EncodedPoint> X;
    std::vector<double> y;
    for (const auto& c : evaluated) {
      X.push_back(encode(space, c));
      y.push_back(objective(space, c));
      db.insert(record(space, c));
      evaluatedSet.insert(c);
    }
    GpFitOptions o;
    o.seed = seed;
    model = GpModel::fit(space, X, y, KernelParams::defaults(space.encodedDim()), o);
    weights = DistanceWeights::ones(space.paramCount());
    ctx.model = &model;
    ctx.bestFeasible = *std::min_element(y.begin(), y.end());
    ctx.cost = [this](const Configuration& c) { return db.costEstimate(c, weights); };
    ctx.relaxedCost = [this](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
      return db.relaxedCostEstimate(x, weights, g);
    };
    ctx.iteration = iteration;
  }

  SmallProblem(const SmallProblem&) = delete;

  AcquisitionOptions options(std::uint64_t seed) const {
    AcquisitionOptions o;
    o.seed = seed;
    o.starts = evaluated;
    o.exclude = [this](const Configuration& c) { return evaluatedSet.count(c) > 0; };
    return o;
  }

  /// Exhaustive maximum of alpha_cool over feasible, unevaluated configurations.
  double enumeratedMaximum() const {
    double best = -INFINITY;
    for (std::uint64_t i = 0; i < space.cardinality(); ++i) {
      auto c = space.configurationAt(i);
      if (evaluatedSet.count(c) || !exactTree(tree, space, c)) continue;
      best = std::max(best, alphaCool(ctx, space, c));
    }
    return best;
  }
};

}  // namespace aspo::test
