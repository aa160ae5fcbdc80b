#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspo/checkpoint_store.hpp"
#include "aspo/constraints.hpp"
#include "aspo/evaluation.hpp"
#include "aspo/param_space.hpp"

namespace aspo {

/// Closed-form stand-in for simulation plus synthesis of one processor.
///
///   cycles = B_bench * (1 + sum_ordinal beta_p * s_{bench,p} * (1 - rank_p)^2
///                         + sum_categorical factor_p[value] * s_{bench,p})
///   fmax   = F0 * (1 - gamma * complexity),  complexity in [0,1]
///   luts   = L0 + sum_ordinal lut_p * rank_p + sum_categorical lut_p[value]
///   power  = P0 + P1 * luts / 1000
///
/// Coefficients come from a versioned JSON model file and are frozen.
class SyntheticModel {
 public:
  struct Coefficients {
    /// Ordinal: one entry. Categorical: one entry per level.
    std::vector<double> cycle;
    std::vector<double> complexity;
    std::vector<double> luts;
    double syncWeight = 1.0;
  };

  static SyntheticModel fromJson(const nlohmann::json& j, const ParameterSpace& space);
  static SyntheticModel fromFile(const std::filesystem::path& path, const ParameterSpace& space);

  const std::string& processor() const { return processor_; }
  int version() const { return version_; }
  const std::map<std::string, std::int64_t>& baseCycles() const { return baseCycles_; }
  std::int64_t baseCyclesFor(const std::string& benchmark) const;

  double fmaxBase() const { return fmaxBase_; }
  double fmaxGamma() const { return gamma_; }
  double lutBase() const { return lutBase_; }
  double tFull() const { return tFull_; }
  double tBase() const { return tBase_; }
  double rho() const { return rho_; }
  double simMinutesPerMegacycle() const { return simRate_; }
  double failureMinutes() const { return failureMinutes_; }
  double cacheHitMinutes() const { return cacheHitMinutes_; }
  ResourceBudget resourceBudget() const { return budget_; }
  const Coefficients& coefficients(std::size_t param) const { return coeffs_.at(param); }
  double sensitivity(const std::string& benchmark, std::size_t param) const;

  /// Weights of the synthesis-time distance and their sum (the largest
  /// possible distance).
  DistanceWeights syncWeights() const;
  double maxDistance() const;

  std::int64_t cycles(const Configuration& cfg, const std::string& benchmark) const;
  double complexity(const Configuration& cfg) const;
  double fmax(const Configuration& cfg, std::uint64_t seed) const;
  std::int64_t luts(const Configuration& cfg) const;
  double power(std::int64_t luts) const;
  double simulationMinutes(std::int64_t cycles) const;

  /// T_full without a reference; otherwise
  /// T_base + T_full * rho * d(cfg, ref) / maxDistance clamped to [T_base, T_full].
  double synthesisTime(const Configuration& cfg, const Configuration* reference) const;

 private:
  ParameterSpace space_;
  std::string processor_;
  int version_ = 1;
  std::map<std::string, std::int64_t> baseCycles_;
  std::map<std::string, std::map<std::string, double>> sensitivity_;
  std::vector<Coefficients> coeffs_;
  double fmaxBase_ = 50.0, gamma_ = 0.3, fmaxNoise_ = 0.0;
  double lutBase_ = 0.0, powerBase_ = 0.0, powerPerKlut_ = 0.0;
  double tFull_ = 60.0, tBase_ = 10.0, rho_ = 0.5;
  double simRate_ = 0.0, failureMinutes_ = 1.0, cacheHitMinutes_ = 0.1;
  double maxComplexity_ = 1.0;
  ResourceBudget budget_;
};

/// Outcome of one harness evaluation, with the provenance the driver needs.
struct Evaluation {
  EvaluationResult result;
  bool cacheHit = false;
  /// Configuration whose checkpoint seeded synthesis, if any.
  std::optional<Configuration> reference;
};

struct ExternalEvaluatorConfig {
  /// Shell command; run through /bin/sh -c.
  std::string command;
  std::chrono::milliseconds timeout{std::chrono::minutes(30)};
};

/// Runs the configured evaluator as a child process: one JSON request line on
/// its stdin, one JSON response line from its stdout. Timeouts come back as a
/// synthesis-stage failure; malformed responses throw Protocol; a nonzero exit
/// status throws Tool.
EvaluationResult externalEvaluate(const ExternalEvaluatorConfig& ext, const ParameterSpace& space,
                                  const Configuration& cfg, const std::optional<std::string>& checkpointHint,
                                  const std::string& benchmark, const std::string& requestId = "r1");

/// Constraint check, resource check, synthesis-time accounting and metrics for
/// the three evaluation strategies.
class EvalHarness {
 public:
  EvalHarness(ParameterSpace space, ConstraintTree tree, SyntheticModel model);
  EvalHarness(ParameterSpace space, ConstraintTree tree, SyntheticModel model, ResourceBudget budget);

  const ParameterSpace& space() const { return space_; }
  const ConstraintTree& tree() const { return tree_; }
  const SyntheticModel& model() const { return model_; }
  const ResourceBudget& budget() const { return budget_; }

  /// Route evaluations through an external evaluator instead of the model.
  void setExternal(ExternalEvaluatorConfig ext) { external_ = std::move(ext); }

  /// Metrics for cfg with direct (reference-free) synthesis accounting.
  EvaluationResult syntheticEvaluate(const Configuration& cfg, const std::string& benchmark,
                                     std::uint64_t seed) const;

  double synthesisTime(const Configuration& cfg, const std::optional<Configuration>& reference,
                       EvalStrategy strategy) const;

  /// Full pipeline. Retrieval looks the configuration up first (cache hit:
  /// stored metrics, 0.1 min) and otherwise matches the nearest checkpoint
  /// under `weights`. Constraint and resource failures cost a flat 1 min.
  Evaluation evaluate(const Configuration& cfg, const std::string& benchmark, EvalStrategy strategy,
                      const CheckpointStore* db, const DistanceWeights& weights, std::uint64_t seed) const;

 private:
  ParameterSpace space_;
  ConstraintTree tree_;
  SyntheticModel model_;
  ResourceBudget budget_;
  std::optional<ExternalEvaluatorConfig> external_;
  mutable std::uint64_t requestCounter_ = 0;
};

}  // namespace aspo
