#include "aspo/evaluation.hpp"

#include "aspo/error.hpp"

namespace aspo {

using nlohmann::json;

const char* toString(FailureStage s) {
  switch (s) {
    case FailureStage::Constraint: return "constraint";
    case FailureStage::Resource: return "resource";
    case FailureStage::Synthesis: return "synthesis";
    case FailureStage::Simulation: return "simulation";
  }
  return "unknown";
}

FailureStage failureStageFromString(const std::string& s) {
  if (s == "constraint") return FailureStage::Constraint;
  if (s == "resource") return FailureStage::Resource;
  if (s == "synthesis") return FailureStage::Synthesis;
  if (s == "simulation") return FailureStage::Simulation;
  throw Error(ErrorKind::InvalidArgument, "unknown failure stage '" + s + "'");
}

const char* toString(EvalStrategy s) {
  switch (s) {
    case EvalStrategy::Direct: return "direct";
    case EvalStrategy::FixedCheckpoint: return "fixed";
    case EvalStrategy::Retrieval: return "retrieval";
  }
  return "unknown";
}

EvalStrategy evalStrategyFromString(const std::string& s) {
  if (s == "direct") return EvalStrategy::Direct;
  if (s == "fixed" || s == "fixed-checkpoint") return EvalStrategy::FixedCheckpoint;
  if (s == "retrieval") return EvalStrategy::Retrieval;
  throw Error(ErrorKind::InvalidArgument, "unknown evaluation strategy '" + s + "'");
}

EvaluationResult EvaluationResult::failure(FailureStage stage, double minutes) {
  EvaluationResult r;
  r.failureStage = stage;
  r.evalMinutes = minutes;
  return r;
}

json EvaluationResult::toJson() const {
  json j = {{"valid", valid()},
            {"cycles", cycles},
            {"fmax_mhz", fmaxMHz},
            {"luts", luts},
            {"power_w", powerW},
            {"eval_minutes", evalMinutes},
            {"synthesis_minutes", synthesisMinutes}};
  j["failure_stage"] = failureStage ? json(toString(*failureStage)) : json(nullptr);
  return j;
}

EvaluationResult EvaluationResult::fromJson(const json& j) {
  try {
    EvaluationResult r;
    r.cycles = j.at("cycles").get<std::int64_t>();
    r.fmaxMHz = j.at("fmax_mhz").get<double>();
    r.luts = j.at("luts").get<std::int64_t>();
    r.powerW = j.at("power_w").get<double>();
    r.evalMinutes = j.at("eval_minutes").get<double>();
    r.synthesisMinutes = j.value("synthesis_minutes", 0.0);
    if (j.contains("failure_stage") && !j["failure_stage"].is_null())
      r.failureStage = failureStageFromString(j["failure_stage"].get<std::string>());
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("malformed evaluation result: ") + e.what());
  }
}

double estimatedExecutionTime(const EvaluationResult& r) {
  if (!r.valid()) throw Error(ErrorKind::UndefinedMetric, "execution time is undefined for an invalid design");
  if (!(r.fmaxMHz > 0.0)) throw Error(ErrorKind::UndefinedMetric, "non-positive maximum frequency");
  // cycles / (MHz * 1e6) seconds, reported in milliseconds.
  return static_cast<double>(r.cycles) / (r.fmaxMHz * 1e3);
}

}  // namespace aspo
