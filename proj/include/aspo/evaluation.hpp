#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

namespace aspo {

enum class FailureStage { Constraint, Resource, Synthesis, Simulation };

const char* toString(FailureStage s);
FailureStage failureStageFromString(const std::string& s);

struct EvaluationResult {
  std::int64_t cycles = 0;
  double fmaxMHz = 0.0;
  std::int64_t luts = 0;
  double powerW = 0.0;
  double evalMinutes = 0.0;
  /// Synthesis share of evalMinutes; zero for failures and cache hits.
  double synthesisMinutes = 0.0;
  std::optional<FailureStage> failureStage;

  bool valid() const { return !failureStage.has_value(); }

  static EvaluationResult failure(FailureStage stage, double minutes);

  nlohmann::json toJson() const;
  static EvaluationResult fromJson(const nlohmann::json& j);

  friend bool operator==(const EvaluationResult&, const EvaluationResult&) = default;
};

enum class EvalStrategy { Direct, FixedCheckpoint, Retrieval };

const char* toString(EvalStrategy s);
EvalStrategy evalStrategyFromString(const std::string& s);

struct ResourceBudget {
  std::int64_t maxLuts = 214604;
};

/// cycles / fmax, in milliseconds. Throws UndefinedMetric for invalid results.
double estimatedExecutionTime(const EvaluationResult& r);

}  // namespace aspo
