#include "aspo/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "aspo/gp.hpp"
#include "aspo/log.hpp"
#include "aspo/warm_start.hpp"

namespace aspo {

const char* toString(Baseline b) {
  switch (b) {
    case Baseline::None: return "aspo";
    case Baseline::Random: return "random";
    case Baseline::VanillaBo: return "vanilla-bo";
    case Baseline::HillClimb: return "hill-climb";
  }
  return "unknown";
}

Baseline baselineFromString(const std::string& s) {
  if (s == "none" || s == "aspo") return Baseline::None;
  if (s == "random") return Baseline::Random;
  if (s == "vanilla-bo") return Baseline::VanillaBo;
  if (s == "hill-climb") return Baseline::HillClimb;
  throw Error(ErrorKind::InvalidArgument, "unknown baseline '" + s + "'");
}

void RunConfig::validate() const {
  if (!(tdtLimitMinutes > 0.0)) throw Error(ErrorKind::InvalidConfiguration, "TDT limit must be positive");
  if (warmStartBudget == 0) throw Error(ErrorKind::InvalidConfiguration, "warm-start budget must be positive");
  if (relearnEvery == 0) throw Error(ErrorKind::InvalidConfiguration, "weight relearning interval must be positive");
  if (!(stagnationTolerance >= 0.0)) throw Error(ErrorKind::InvalidConfiguration, "stagnation tolerance must be non-negative");
  if (!(timeCompression > 0.0)) throw Error(ErrorKind::InvalidConfiguration, "time compression must be positive");
  if (resourceBudget && resourceBudget->maxLuts <= 0) throw Error(ErrorKind::InvalidConfiguration, "LUT budget must be positive");
  schedule.validate();
}

Problem Problem::load(const RunConfig& rc) {
  auto space = ParameterSpace::fromFile(rc.spaceFile);
  auto tree = rc.constraintFile.empty() ? unconstrained(space) : parseConstraintsFile(rc.constraintFile, space);
  auto model = SyntheticModel::fromFile(rc.modelFile, space);
  return Problem{std::move(space), std::move(tree), std::move(model)};
}

std::size_t RunReport::invalidCount() const {
  return static_cast<std::size_t>(
      std::count_if(history.begin(), history.end(), [](const HistoryEntry& e) { return !e.result.valid(); }));
}

std::optional<double> RunReport::idr() const {
  if (history.empty()) return std::nullopt;
  return static_cast<double>(invalidCount()) / static_cast<double>(history.size());
}

namespace {

using ConfigSet = std::unordered_set<Configuration, ConfigurationHash>;

class Session {
 public:
  Session(const Problem& p, const RunConfig& rc, Baseline baseline)
      : p_(p),
        rc_(rc),
        harness_(p.space, p.tree, p.model, rc.resourceBudget.value_or(p.model.resourceBudget())),
        db_(p.space),
        weights_(DistanceWeights::ones(p.space.paramCount())) {
    rc.validate();
    p.model.baseCyclesFor(rc.benchmark);
    if (rc.external) harness_.setExternal(*rc.external);
    report_.generator = toString(baseline);
    report_.processor = p.model.processor();
    report_.benchmark = rc.benchmark;
    report_.seed = rc.seed;
    report_.strategy = toString(rc.strategy);
    report_.timeCompression = rc.timeCompression;
    report_.weights = weights_.values();
  }

  std::size_t totalBudget() const { return rc_.warmStartBudget + rc_.budgetIterations; }
  std::size_t evaluations() const { return report_.history.size(); }
  bool overTime() const { return report_.tdtMinutes >= rc_.tdtLimitMinutes; }
  bool evaluated(const Configuration& c) const { return evaluated_.count(c) > 0; }
  const ConfigSet& evaluatedSet() const { return evaluated_; }
  RunReport& report() { return report_; }
  const CheckpointStore& db() const { return db_; }
  const DistanceWeights& weights() const { return weights_; }

  const HistoryEntry& record(const Configuration& cfg, const std::string& phase, std::size_t iteration,
                             std::optional<double> alpha = std::nullopt,
                             std::optional<double> cost = std::nullopt) {
    Evaluation ev = harness_.evaluate(cfg, rc_.benchmark, rc_.strategy, &db_, weights_, rc_.seed);
    HistoryEntry e;
    e.index = report_.history.size();
    e.phase = phase;
    e.iteration = iteration;
    e.config = cfg;
    e.result = ev.result;
    e.alpha = alpha;
    e.costEstimate = cost;
    e.cacheHit = ev.cacheHit;
    e.reference = ev.reference;
    report_.tdtMinutes += ev.result.evalMinutes;
    if (ev.result.valid()) {
      double eet = estimatedExecutionTime(ev.result);
      e.eetMs = eet;
      if (!report_.bestEetMs || eet < *report_.bestEetMs) {
        report_.bestEetMs = eet;
        report_.bestConfig = cfg;
      }
    }
    e.bestEetMs = report_.bestEetMs;
    e.tdtMinutes = report_.tdtMinutes;
    evaluated_.insert(cfg);

    if (ev.result.valid() && !ev.cacheHit && ev.result.synthesisMinutes > 0.0) {
      CheckpointRecord r;
      r.config = cfg;
      r.metrics = ev.result;
      r.artifact = "checkpoint-" + configurationDigest(p_.space, cfg);
      r.synthesisMinutes = ev.result.synthesisMinutes;
      r.insertedAt = virtualTimestamp(report_.tdtMinutes);
      db_.insert(std::move(r));
      if (++sinceLearn_ >= rc_.relearnEvery && db_.size() >= 3 && !rc_.external) {
        sinceLearn_ = 0;
        const auto& model = p_.model;
        WeightLearningOptions wo;
        wo.seed = rc_.seed * 7919 + db_.size();
        weights_ = learnWeights(
            db_, [&model](const Configuration& x, const Configuration& y) { return model.synthesisTime(x, &y); }, wo);
        report_.weights = weights_.values();
      }
    }
    report_.history.push_back(std::move(e));
    return report_.history.back();
  }

  /// Training set: valid, synthesized entries (cache hits are repeats).
  void trainingData(std::vector<EncodedPoint>& X, std::vector<double>& y) const {
    for (const auto& e : report_.history) {
      if (!e.result.valid() || e.cacheHit) continue;
      X.push_back(encode(p_.space, e.config));
      y.push_back(objective(*e.eetMs));
    }
  }

  double objective(double eet) const { return rc_.logObjective ? std::log(eet) : eet; }

  std::optional<double> bestObjective() const {
    if (!report_.bestEetMs) return std::nullopt;
    return objective(*report_.bestEetMs);
  }

  RunError failure(const Error& e) {
    report_.stopReason = "numerical-failure";
    return RunError(ErrorKind::NumericalFailure, e.what(), report_);
  }

 private:
  const Problem& p_;
  const RunConfig& rc_;
  EvalHarness harness_;
  CheckpointStore db_;
  DistanceWeights weights_;
  RunReport report_;
  ConfigSet evaluated_;
  std::size_t sinceLearn_ = 0;
};

class Stagnation {
 public:
  Stagnation(const RunConfig& rc, std::optional<double> start)
      : window_(rc.stagnationWindow), tol_(rc.stagnationTolerance), last_(start) {}

  /// Feeds the best EET after an iteration; true once the run has stalled.
  /// Gains are measured against the best at the last counted improvement.
  bool update(std::optional<double> best) {
    if (window_ == 0) return false;
    bool improved = best && (!last_ || *best < *last_ * (1.0 - tol_));
    if (improved) last_ = best;
    stalled_ = improved ? 0 : stalled_ + 1;
    return stalled_ >= window_;
  }

 private:
  std::size_t window_;
  double tol_;
  std::optional<double> last_;
  std::size_t stalled_ = 0;
};

Configuration randomUnevaluated(const ParameterSpace& space, const ConstraintTree* tree, const ConfigSet& seen,
                                std::mt19937_64& rng) {
  for (int i = 0; i < 100000; ++i) {
    Configuration c = randomConfiguration(space, rng);
    if (seen.count(c)) continue;
    if (tree && !exactTree(*tree, space, c)) continue;
    return c;
  }
  throw Error(ErrorKind::NoFeasibleCandidate, "no unevaluated configuration found by sampling");
}

// Shared BO loop of ASPO and the vanilla baseline.
void boLoop(Session& s, const Problem& p, const RunConfig& rc, bool vanilla, const std::vector<Configuration>& starts) {
  const ConstraintTree genTree = (!vanilla && rc.constraintAware) ? p.tree : unconstrained(p.space);
  std::mt19937_64 rng(rc.seed ^ 0x9e3779b97f4a7c15ull);
  Stagnation stagnation(rc, s.report().bestEetMs);
  for (std::size_t t = 0; t < rc.budgetIterations; ++t) {
    if (s.overTime()) {
      s.report().stopReason = "tdt-limit";
      return;
    }
    auto wallStart = std::chrono::steady_clock::now();
    std::vector<EncodedPoint> X;
    std::vector<double> y;
    s.trainingData(X, y);

    Configuration next;
    std::optional<double> alpha, cost;
    if (X.size() < 2) {
      // Too little data for a surrogate: keep sampling.
      next = randomUnevaluated(p.space, vanilla ? nullptr : &genTree, s.evaluatedSet(), rng);
    } else {
      GpFitOptions fo;
      fo.seed = rc.seed * 1000003ull + t;
      fo.snapInputs = !vanilla;
      GpModel model;
      try {
        model = GpModel::fit(p.space, X, y, KernelParams::defaults(p.space.encodedDim()), fo);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NumericalFailure) throw s.failure(e);
        throw;
      }

      AcquisitionContext ctx;
      ctx.model = &model;
      ctx.bestFeasible = s.bestObjective();
      ctx.schedule = rc.schedule;
      ctx.iteration = t;
      const CheckpointStore& db = s.db();
      const DistanceWeights& w = s.weights();
      if (!vanilla && rc.strategy == EvalStrategy::Retrieval) {
        ctx.cost = [&db, &w](const Configuration& c) { return db.costEstimate(c, w, 1.0); };
        ctx.relaxedCost = [&db, &w](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
          return db.relaxedCostEstimate(x, w, g, 1.0);
        };
      } else if (!vanilla && rc.strategy == EvalStrategy::FixedCheckpoint) {
        Configuration ref = p.space.defaults();
        const ParameterSpace& space = p.space;
        ctx.cost = [&space, &w, ref](const Configuration& c) { return weightedDistance(space, c, ref, w); };
        ctx.relaxedCost = [&space, &w, ref](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
          return relaxedWeightedDistance(space, x, ref, w, g);
        };
      }

      AcquisitionOptions ao;
      ao.seed = rc.seed * 2654435761ull + t;
      ao.starts = starts;
      ao.vanilla = vanilla;
      const ConfigSet& seen = s.evaluatedSet();
      ao.exclude = [&seen](const Configuration& c) { return seen.count(c) > 0; };
      AcquisitionResult ar = maximizeAcquisition(ctx, p.space, genTree, ao);
      next = ar.config;
      alpha = ar.value;
      if (ctx.cost) cost = ctx.cost(next);
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wallStart).count();
    s.report().overheadSeconds += wall;
    if (rc.accountOverhead) s.report().tdtMinutes += wall / 60.0;

    s.record(next, "bo", t + 1, alpha, cost);
    if (stagnation.update(s.report().bestEetMs)) {
      s.report().stopReason = "stagnation";
      return;
    }
  }
  s.report().stopReason = "budget";
}

bool runWarmup(Session& s, const std::vector<Configuration>& configs, const std::string& phase) {
  for (const auto& c : configs) {
    if (s.overTime()) {
      s.report().stopReason = "tdt-limit";
      return false;
    }
    s.record(c, phase, 0);
  }
  return true;
}

RunReport runAspo(const Problem& p, const RunConfig& rc) {
  Session s(p, rc, Baseline::None);
  const ConstraintTree genTree = rc.constraintAware ? p.tree : unconstrained(p.space);
  auto warm = warmStartConfigs(p.space, genTree, rc.seed, rc.warmStartBudget);
  if (!runWarmup(s, warm, "warm-start")) return s.report();
  boLoop(s, p, rc, false, warm);
  return s.report();
}

RunReport runRandom(const Problem& p, const RunConfig& rc) {
  Session s(p, rc, Baseline::Random);
  std::mt19937_64 rng(rc.seed);
  for (std::size_t i = 0; i < s.totalBudget(); ++i) {
    if (s.overTime()) {
      s.report().stopReason = "tdt-limit";
      return s.report();
    }
    s.record(randomConfiguration(p.space, rng), "random", i + 1);
  }
  s.report().stopReason = "budget";
  return s.report();
}

RunReport runVanilla(const Problem& p, const RunConfig& rc) {
  Session s(p, rc, Baseline::VanillaBo);
  std::mt19937_64 rng(rc.seed);
  std::vector<Configuration> initial;
  for (std::size_t i = 0; i < rc.warmStartBudget; ++i) initial.push_back(randomConfiguration(p.space, rng));
  if (!runWarmup(s, initial, "initial")) return s.report();
  boLoop(s, p, rc, true, {});
  return s.report();
}

RunReport runHillClimb(const Problem& p, const RunConfig& rc) {
  Session s(p, rc, Baseline::HillClimb);
  std::unordered_map<Configuration, std::optional<double>, ConfigurationHash> memo;
  std::size_t step = 0;
  auto eval = [&](const Configuration& c, const char* phase) -> std::optional<double> {
    auto it = memo.find(c);
    if (it != memo.end()) return it->second;
    const auto& e = s.record(c, phase, step);
    memo.emplace(c, e.eetMs);
    return e.eetMs;
  };
  auto stop = [&](const char* why) {
    s.report().stopReason = why;
    return s.report();
  };

  Configuration current = p.space.defaults();
  std::optional<double> currentEet = eval(current, "initial");
  for (;;) {
    ++step;
    std::optional<Configuration> bestNb;
    std::optional<double> bestEet;
    for (std::size_t i = 0; i < p.space.paramCount(); ++i) {
      for (std::size_t l = 0; l < p.space.param(i).levelCount(); ++l) {
        if (l == current.level(i)) continue;
        Configuration n = current;
        n.setLevel(i, l);
        if (!memo.count(n)) {
          if (s.evaluations() >= s.totalBudget()) return stop("budget");
          if (s.overTime()) return stop("tdt-limit");
        }
        auto v = eval(n, "neighbor");
        if (v && (!bestEet || *v < *bestEet)) {
          bestEet = v;
          bestNb = n;
        }
      }
    }
    if (!bestNb || (currentEet && !(*bestEet < *currentEet))) return stop("converged");
    current = *bestNb;
    currentEet = bestEet;
  }
}

}  // namespace

RunReport runOptimization(const Problem& problem, const RunConfig& rc) { return runAspo(problem, rc); }

RunReport runOptimization(const RunConfig& rc) {
  Problem p = Problem::load(rc);
  return runAspo(p, rc);
}

RunReport runBaseline(const Problem& problem, const RunConfig& rc, Baseline baseline) {
  switch (baseline) {
    case Baseline::None: return runAspo(problem, rc);
    case Baseline::Random: return runRandom(problem, rc);
    case Baseline::VanillaBo: return runVanilla(problem, rc);
    case Baseline::HillClimb: return runHillClimb(problem, rc);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown baseline");
}

RunReport runBaseline(const RunConfig& rc, Baseline baseline) {
  Problem p = Problem::load(rc);
  return runBaseline(p, rc, baseline);
}

StrategyComparison compareStrategies(const Problem& p, const std::string& benchmark, std::size_t count,
                                     std::uint64_t seed, std::size_t warmStartBudget) {
  EvalHarness harness(p.space, p.tree, p.model);
  const auto budget = harness.budget();
  std::mt19937_64 rng(seed);
  StrategyComparison out;
  ConfigSet chosen;
  chosen.insert(p.space.defaults());
  for (std::size_t draws = 0; out.configs.size() < count; ++draws) {
    if (draws >= 100000) throw Error(ErrorKind::InfeasibleSpace, "too few deployable configurations to compare strategies");
    Configuration c = randomConfiguration(p.space, rng);
    if (chosen.count(c) || !exactTree(p.tree, p.space, c) || p.model.luts(c) > budget.maxLuts) continue;
    chosen.insert(c);
    out.configs.push_back(c);
  }

  const auto ones = DistanceWeights::ones(p.space.paramCount());
  CheckpointStore db(p.space);
  auto seedRecord = [&](const Configuration& c) {
    auto r = harness.syntheticEvaluate(c, benchmark, seed);
    if (!r.valid()) return;
    db.insert(CheckpointRecord{c, encode(p.space, c), r, "checkpoint-" + configurationDigest(p.space, c),
                               r.synthesisMinutes, virtualTimestamp(0.0)});
  };
  seedRecord(p.space.defaults());
  for (const auto& c : warmStartConfigs(p.space, p.tree, seed, warmStartBudget))
    if (!chosen.count(c)) seedRecord(c);

  auto tsyn = [&p](const Configuration& x, const Configuration& y) { return p.model.synthesisTime(x, &y); };
  WeightLearningOptions wo;
  wo.seed = seed;
  DistanceWeights w = db.size() >= 3 ? learnWeights(db, tsyn, wo) : ones;
  std::size_t sinceLearn = 0;
  for (const auto& c : out.configs) {
    out.direct.push_back(harness.evaluate(c, benchmark, EvalStrategy::Direct, nullptr, ones, seed).result.evalMinutes);
    out.fixed.push_back(
        harness.evaluate(c, benchmark, EvalStrategy::FixedCheckpoint, nullptr, ones, seed).result.evalMinutes);
    auto ev = harness.evaluate(c, benchmark, EvalStrategy::Retrieval, &db, w, seed);
    out.retrieval.push_back(ev.result.evalMinutes);
    if (ev.result.valid() && !ev.cacheHit) {
      db.insert(CheckpointRecord{c, encode(p.space, c), ev.result, "checkpoint-" + configurationDigest(p.space, c),
                                 ev.result.synthesisMinutes, virtualTimestamp(0.0)});
      if (++sinceLearn >= 5) {
        sinceLearn = 0;
        wo.seed = seed + db.size();
        w = learnWeights(db, tsyn, wo);
      }
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  out.meanDirect = mean(out.direct);
  out.meanFixed = mean(out.fixed);
  out.meanRetrieval = mean(out.retrieval);
  return out;
}

}  // namespace aspo
