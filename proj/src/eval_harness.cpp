#include "aspo/eval_harness.hpp"

#include "aspo/error.hpp"

namespace aspo {

EvalHarness::EvalHarness(ParameterSpace space, ConstraintTree tree, SyntheticModel model)
    : EvalHarness(space, std::move(tree), model, model.resourceBudget()) {}

EvalHarness::EvalHarness(ParameterSpace space, ConstraintTree tree, SyntheticModel model, ResourceBudget budget)
    : space_(std::move(space)), tree_(std::move(tree)), model_(std::move(model)), budget_(budget) {
  if (budget_.maxLuts <= 0) throw Error(ErrorKind::InvalidConfiguration, "resource budget must be positive");
  if (tree_.paramCount != space_.paramCount())
    throw Error(ErrorKind::DimensionMismatch, "constraint tree was built for a different space");
}

EvaluationResult EvalHarness::syntheticEvaluate(const Configuration& cfg, const std::string& benchmark,
                                                std::uint64_t seed) const {
  space_.check(cfg);
  model_.baseCyclesFor(benchmark);
  if (!exactTree(tree_, space_, cfg)) return EvaluationResult::failure(FailureStage::Constraint, model_.failureMinutes());
  auto luts = model_.luts(cfg);
  if (luts > budget_.maxLuts) return EvaluationResult::failure(FailureStage::Resource, model_.failureMinutes());
  EvaluationResult r;
  r.cycles = model_.cycles(cfg, benchmark);
  r.fmaxMHz = model_.fmax(cfg, seed);
  r.luts = luts;
  r.powerW = model_.power(luts);
  r.synthesisMinutes = model_.synthesisTime(cfg, nullptr);
  r.evalMinutes = r.synthesisMinutes + model_.simulationMinutes(r.cycles);
  return r;
}

double EvalHarness::synthesisTime(const Configuration& cfg, const std::optional<Configuration>& reference,
                                  EvalStrategy strategy) const {
  space_.check(cfg);
  if (strategy == EvalStrategy::Direct || !reference) return model_.synthesisTime(cfg, nullptr);
  space_.check(*reference);
  return model_.synthesisTime(cfg, &*reference);
}

Evaluation EvalHarness::evaluate(const Configuration& cfg, const std::string& benchmark, EvalStrategy strategy,
                                 const CheckpointStore* db, const DistanceWeights& weights,
                                 std::uint64_t seed) const {
  space_.check(cfg);
  if (!external_) model_.baseCyclesFor(benchmark);
  Evaluation ev;
  if (!exactTree(tree_, space_, cfg)) {
    ev.result = EvaluationResult::failure(FailureStage::Constraint, model_.failureMinutes());
    return ev;
  }
  if (strategy == EvalStrategy::Retrieval && db) {
    if (auto hit = db->lookup(cfg)) {
      ev.cacheHit = true;
      ev.reference = cfg;
      ev.result = hit->metrics;
      ev.result.evalMinutes = model_.cacheHitMinutes();
      ev.result.synthesisMinutes = 0.0;
      return ev;
    }
  }

  switch (strategy) {
    case EvalStrategy::Direct: break;
    case EvalStrategy::FixedCheckpoint: ev.reference = space_.defaults(); break;
    case EvalStrategy::Retrieval:
      if (db && !db->empty()) ev.reference = db->matchConfig(cfg, weights).config;
      break;
  }

  if (external_) {
    std::optional<std::string> hint;
    if (ev.reference && db) {
      if (auto rec = db->lookup(*ev.reference)) hint = rec->artifact;
    }
    if (ev.reference && !hint) hint = "checkpoint-" + configurationDigest(space_, *ev.reference);
    ev.result = externalEvaluate(*external_, space_, cfg, hint, benchmark, "r" + std::to_string(++requestCounter_));
    if (ev.result.valid() && ev.result.luts > budget_.maxLuts) {
      double minutes = ev.result.evalMinutes;
      ev.result = EvaluationResult::failure(FailureStage::Resource, minutes);
    }
    return ev;
  }

  auto luts = model_.luts(cfg);
  if (luts > budget_.maxLuts) {
    ev.result = EvaluationResult::failure(FailureStage::Resource, model_.failureMinutes());
    ev.reference.reset();
    return ev;
  }
  EvaluationResult& r = ev.result;
  r.cycles = model_.cycles(cfg, benchmark);
  r.fmaxMHz = model_.fmax(cfg, seed);
  r.luts = luts;
  r.powerW = model_.power(luts);
  r.synthesisMinutes = model_.synthesisTime(cfg, ev.reference ? &*ev.reference : nullptr);
  r.evalMinutes = r.synthesisMinutes + model_.simulationMinutes(r.cycles);
  return ev;
}

}  // namespace aspo
