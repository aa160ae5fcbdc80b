#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aspo/acquisition.hpp"
#include "aspo/checkpoint_store.hpp"
#include "aspo/constraints.hpp"
#include "aspo/error.hpp"
#include "aspo/eval_harness.hpp"
#include "aspo/param_space.hpp"

namespace aspo {

enum class Baseline { None, Random, VanillaBo, HillClimb };

const char* toString(Baseline b);
Baseline baselineFromString(const std::string& s);

struct RunConfig {
  std::filesystem::path spaceFile;
  std::filesystem::path constraintFile;
  std::filesystem::path modelFile;
  std::string benchmark = "coremark";
  std::size_t budgetIterations = 30;
  double tdtLimitMinutes = 2100.0;
  std::size_t warmStartBudget = 10;
  std::uint64_t seed = 0;
  CoolingSchedule schedule;
  EvalStrategy strategy = EvalStrategy::Retrieval;
  /// Overrides the model file's LUT budget.
  std::optional<ResourceBudget> resourceBudget;
  /// When false the generator ignores the constraint tree; the harness still
  /// rejects violating designs.
  bool constraintAware = true;
  /// Stop after this many consecutive iterations whose best EET improved by
  /// no more than stagnationTolerance (relative). 0 disables the rule.
  std::size_t stagnationWindow = 10;
  double stagnationTolerance = 1e-3;
  std::size_t relearnEvery = 5;
  /// Reported alongside TDT; minutes of accounted time per wall-clock minute.
  double timeCompression = 1.0 / 60.0;
  /// Add measured optimizer wall time to the virtual clock. Off by default
  /// because it makes reports differ between reruns.
  bool accountOverhead = false;
  /// Surrogate models log(EET) rather than EET.
  bool logObjective = true;
  std::optional<ExternalEvaluatorConfig> external;

  void validate() const;
};

/// Parsed inputs of one run.
struct Problem {
  ParameterSpace space;
  ConstraintTree tree;
  SyntheticModel model;

  static Problem load(const RunConfig& rc);
};

struct HistoryEntry {
  std::size_t index = 0;
  /// "warm-start", "bo", "random", "initial", "neighbor", ...
  std::string phase;
  /// Generator iteration; warm-start and initial designs use 0.
  std::size_t iteration = 0;
  Configuration config;
  EvaluationResult result;
  std::optional<double> alpha;
  std::optional<double> costEstimate;
  bool cacheHit = false;
  std::optional<Configuration> reference;
  std::optional<double> eetMs;
  std::optional<double> bestEetMs;
  double tdtMinutes = 0.0;
};

struct RunReport {
  std::string generator;
  std::string processor;
  std::string benchmark;
  std::uint64_t seed = 0;
  std::string strategy;
  std::vector<HistoryEntry> history;
  std::optional<Configuration> bestConfig;
  std::optional<double> bestEetMs;
  double tdtMinutes = 0.0;
  double timeCompression = 1.0 / 60.0;
  /// Measured optimizer wall time; kept out of the report files unless accounted.
  double overheadSeconds = 0.0;
  std::string stopReason;
  std::vector<double> weights;

  std::size_t invalidCount() const;
  /// invalid / total; absent for an empty history.
  std::optional<double> idr() const;
};

/// Run aborted by a surrogate failure; carries everything evaluated so far.
class RunError : public Error {
 public:
  RunError(ErrorKind kind, const std::string& what, RunReport partial)
      : Error(kind, what), partial_(std::make_shared<RunReport>(std::move(partial))) {}
  const RunReport& partial() const { return *partial_; }

 private:
  std::shared_ptr<RunReport> partial_;
};

RunReport runOptimization(const RunConfig& rc);
RunReport runOptimization(const Problem& problem, const RunConfig& rc);

RunReport runBaseline(const RunConfig& rc, Baseline baseline);
RunReport runBaseline(const Problem& problem, const RunConfig& rc, Baseline baseline);

/// Mean evaluation minutes of the three strategies on the same random
/// feasible configurations.
struct StrategyComparison {
  std::vector<Configuration> configs;
  std::vector<double> direct, fixed, retrieval;
  double meanDirect = 0.0, meanFixed = 0.0, meanRetrieval = 0.0;
};

/// Retrieval starts from a database holding the fixed checkpoint (the default
/// configuration) and the warm-start designs, then accumulates the evaluated
/// configurations and re-learns its weights as a run would.
StrategyComparison compareStrategies(const Problem& problem, const std::string& benchmark, std::size_t count,
                                     std::uint64_t seed, std::size_t warmStartBudget = 10);

/// Writes report.jsonl and report.csv into `dir`, creating it if needed.
void emitReport(const RunReport& report, const ParameterSpace& space, const std::filesystem::path& dir);
std::string reportJsonl(const RunReport& report, const ParameterSpace& space);
std::string reportCsv(const RunReport& report, const ParameterSpace& space);

/// ISO-8601 UTC timestamp `minutes` after 2000-01-01T00:00:00Z.
std::string virtualTimestamp(double minutes);

}  // namespace aspo
