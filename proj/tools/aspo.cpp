#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "aspo/assets.hpp"
#include "aspo/driver.hpp"
#include "aspo/log.hpp"

namespace {

enum Exit { Ok = 0, Failure = 1, ConfigError = 2, Infeasible = 3, Numerical = 4 };

int exitCodeFor(aspo::ErrorKind kind) {
  using aspo::ErrorKind;
  switch (kind) {
    case ErrorKind::InfeasibleSpace:
    case ErrorKind::NoFeasibleCandidate: return Infeasible;
    case ErrorKind::NumericalFailure: return Numerical;
    case ErrorKind::Tool:
    case ErrorKind::Protocol:
    case ErrorKind::EmptyDatabase:
    case ErrorKind::InsufficientRecords:
    case ErrorKind::UndefinedMetric: return Failure;
    default: return ConfigError;
  }
}

std::string defaultAssetDir() {
  if (const char* env = std::getenv("ASPO_ASSETS")) return env;
  return ASPO_DEFAULT_ASSET_DIR;
}

struct Inputs {
  std::string processor;
  std::string assets = defaultAssetDir();
  std::string space, constraints, model;

  void add(CLI::App* app) {
    app->add_option("--processor", processor, "Bundled processor (el2_veer, rocketchip, boom)");
    app->add_option("--assets", assets, "Bundled asset directory")->capture_default_str();
    app->add_option("--space", space, "Design-space file");
    app->add_option("--constraints", constraints, "Constraint file");
    app->add_option("--model", model, "Synthetic model file");
  }

  // Explicit files win over the bundled processor's.
  void resolve(aspo::RunConfig& rc) const {
    if (!processor.empty()) {
      auto manifest = aspo::AssetManifest::fromFile(std::filesystem::path(assets) / "manifest.json");
      auto it = manifest.processors.find(processor);
      if (it == manifest.processors.end())
        throw aspo::Error(aspo::ErrorKind::InvalidConfiguration, "no bundled processor named '" + processor + "'");
      std::filesystem::path root(assets);
      rc.spaceFile = root / it->second.space;
      if (!it->second.constraints.empty()) rc.constraintFile = root / it->second.constraints;
      rc.modelFile = root / it->second.model;
    }
    if (!space.empty()) rc.spaceFile = space;
    if (!constraints.empty()) rc.constraintFile = constraints;
    if (!model.empty()) rc.modelFile = model;
    if (rc.spaceFile.empty() || rc.modelFile.empty())
      throw aspo::Error(aspo::ErrorKind::InvalidConfiguration, "need --processor or both --space and --model");
  }
};

void printSummary(const aspo::RunReport& r, const aspo::ParameterSpace& space) {
  auto idr = r.idr();
  std::printf("generator   %s (%s, %s, seed %llu)\n", r.generator.c_str(), r.processor.c_str(), r.benchmark.c_str(),
              static_cast<unsigned long long>(r.seed));
  std::printf("evaluations %zu (invalid %zu, IDR %s)\n", r.history.size(), r.invalidCount(),
              idr ? std::to_string(*idr).c_str() : "n/a");
  std::printf("TDT         %.2f min (compressed %.2f)\n", r.tdtMinutes, r.tdtMinutes * r.timeCompression);
  if (r.bestEetMs) {
    std::printf("best EET    %.6f ms\n", *r.bestEetMs);
    std::printf("best config %s\n", space.configToJson(*r.bestConfig).dump().c_str());
  } else {
    std::printf("best EET    none (no valid design)\n");
  }
  std::printf("stopped     %s\n", r.stopReason.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint-aware Bayesian optimization of soft-processor parameters"};
  app.require_subcommand(1);
  bool quiet = false, verbose = false;
  app.add_flag("-q,--quiet", quiet, "Only print errors");
  app.add_flag("-v,--verbose", verbose, "Print progress information");

  aspo::RunConfig rc;
  std::string mode = "paper-ratio", strategy = "retrieval", baseline = "none", outDir = "aspo-out";
  std::string evaluator;
  double evaluatorTimeout = 30.0;
  bool noConstraints = false;

  auto* run = app.add_subcommand("run", "Run one optimization and write report.jsonl / report.csv");
  Inputs runInputs;
  runInputs.add(run);
  run->add_option("--benchmark", rc.benchmark, "Benchmark name")->capture_default_str();
  run->add_option("--iters", rc.budgetIterations, "Iterations after the warm start")->capture_default_str();
  run->add_option("--warm-start", rc.warmStartBudget, "Warm-start designs")->capture_default_str();
  run->add_option("--seed", rc.seed, "Random seed")->capture_default_str();
  run->add_option("--mode", mode, "Cost cooling mode")->check(CLI::IsMember({"paper-ratio", "exponent"}))->capture_default_str();
  run->add_option("--strategy", strategy, "Evaluation strategy")
      ->check(CLI::IsMember({"direct", "fixed", "fixed-checkpoint", "retrieval"}))
      ->capture_default_str();
  run->add_option("--baseline", baseline, "Generator")
      ->check(CLI::IsMember({"none", "random", "vanilla-bo", "hill-climb"}))
      ->capture_default_str();
  run->add_option("--out", outDir, "Report directory")->capture_default_str();
  run->add_option("--tdt-limit", rc.tdtLimitMinutes, "Total design time cap in minutes")->capture_default_str();
  run->add_option("--lambda0", rc.schedule.lambda0, "Initial cooling factor")->capture_default_str();
  run->add_option("--cooling-rate", rc.schedule.k, "Cooling decay rate")->capture_default_str();
  run->add_option("--stagnation", rc.stagnationWindow, "Stop after this many iterations without gain (0: never)")
      ->capture_default_str();
  run->add_option("--time-compression", rc.timeCompression, "Reported compression of accounted minutes")
      ->capture_default_str();
  run->add_flag("--no-constraints", noConstraints, "Generate without the constraint tree");
  run->add_flag("--account-overhead", rc.accountOverhead, "Add measured optimizer time to TDT");
  run->add_option("--evaluator", evaluator, "External evaluator command (run via /bin/sh -c)");
  run->add_option("--evaluator-timeout", evaluatorTimeout, "External evaluator timeout in minutes")->capture_default_str();

  auto* bench = app.add_subcommand("eval-bench", "Compare the three evaluation strategies on random configurations");
  Inputs benchInputs;
  benchInputs.add(bench);
  std::string benchName = "coremark";
  std::size_t count = 10;
  std::uint64_t benchSeed = 0;
  bool allProcessors = false;
  bench->add_option("--benchmark", benchName, "Benchmark name")->capture_default_str();
  bench->add_option("--count", count, "Random configurations")->capture_default_str();
  bench->add_option("--seed", benchSeed, "Random seed")->capture_default_str();
  bench->add_flag("--all", allProcessors, "Every bundled processor");

  auto* validate = app.add_subcommand("validate", "Check space, constraint and model files");
  Inputs validateInputs;
  validate->add_option("--processor", validateInputs.processor, "Bundled processor");
  validate->add_option("--assets", validateInputs.assets, "Bundled asset directory")->capture_default_str();
  validate->add_option("--space", validateInputs.space, "Design-space file");
  validate->add_option("--constraints", validateInputs.constraints, "Constraint file");
  validate->add_option("--model", validateInputs.model, "Synthetic model file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? Ok : ConfigError;
  }
  aspo::setLogLevel(quiet ? aspo::LogLevel::Quiet : verbose ? aspo::LogLevel::Info : aspo::LogLevel::Warning);

  try {
    if (*run) {
      runInputs.resolve(rc);
      rc.schedule.mode = aspo::acquisitionModeFromString(mode);
      rc.strategy = aspo::evalStrategyFromString(strategy);
      rc.constraintAware = !noConstraints;
      if (!evaluator.empty()) {
        aspo::ExternalEvaluatorConfig ext;
        ext.command = evaluator;
        ext.timeout = std::chrono::milliseconds(static_cast<long long>(evaluatorTimeout * 60000.0));
        rc.external = ext;
      }
      auto problem = aspo::Problem::load(rc);
      aspo::RunReport report;
      try {
        report = aspo::runBaseline(problem, rc, aspo::baselineFromString(baseline));
      } catch (const aspo::RunError& e) {
        aspo::emitReport(e.partial(), problem.space, outDir);
        std::cerr << "aspo: " << e.what() << " (partial report written to " << outDir << ")\n";
        return exitCodeFor(e.kind());
      }
      aspo::emitReport(report, problem.space, outDir);
      if (!quiet) printSummary(report, problem.space);
      return Ok;
    }

    if (*bench) {
      std::vector<std::pair<std::string, aspo::Problem>> problems;
      if (allProcessors) {
        auto assets = aspo::loadAssets(benchInputs.assets);
        for (auto& [name, p] : assets.processors) problems.emplace_back(name, p);
      } else {
        aspo::RunConfig brc;
        benchInputs.resolve(brc);
        problems.emplace_back(benchInputs.processor.empty() ? "custom" : benchInputs.processor, aspo::Problem::load(brc));
      }
      std::printf("%-12s %10s %10s %10s %8s\n", "processor", "direct", "fixed", "retrieval", "saving");
      for (const auto& [name, p] : problems) {
        auto cmp = aspo::compareStrategies(p, benchName, count, benchSeed);
        std::printf("%-12s %10.2f %10.2f %10.2f %7.1f%%\n", name.c_str(), cmp.meanDirect, cmp.meanFixed,
                    cmp.meanRetrieval, 100.0 * (1.0 - cmp.meanRetrieval / cmp.meanDirect));
      }
      return Ok;
    }

    if (*validate) {
      if (validateInputs.processor.empty() && validateInputs.space.empty()) {
        auto assets = aspo::loadAssets(validateInputs.assets);
        for (const auto& [name, p] : assets.processors)
          std::printf("%-12s ok: %zu parameters, %llu configurations, %zu constraint leaves\n", name.c_str(),
                      p.space.paramCount(), static_cast<unsigned long long>(p.space.cardinality()), p.tree.leafCount());
        return Ok;
      }
      auto space = aspo::ParameterSpace::fromFile(validateInputs.space.empty() ? [&] {
        aspo::RunConfig vrc;
        validateInputs.model = validateInputs.model.empty() ? "-" : validateInputs.model;
        auto manifest = aspo::AssetManifest::fromFile(std::filesystem::path(validateInputs.assets) / "manifest.json");
        auto it = manifest.processors.find(validateInputs.processor);
        if (it == manifest.processors.end())
          throw aspo::Error(aspo::ErrorKind::InvalidConfiguration, "no bundled processor named '" + validateInputs.processor + "'");
        if (validateInputs.constraints.empty() && !it->second.constraints.empty())
          validateInputs.constraints = (std::filesystem::path(validateInputs.assets) / it->second.constraints).string();
        if (validateInputs.model == "-") validateInputs.model = (std::filesystem::path(validateInputs.assets) / it->second.model).string();
        return (std::filesystem::path(validateInputs.assets) / it->second.space).string();
      }() : validateInputs.space);
      auto tree = validateInputs.constraints.empty() ? aspo::unconstrained(space)
                                                     : aspo::parseConstraintsFile(validateInputs.constraints, space);
      if (!validateInputs.model.empty()) aspo::SyntheticModel::fromFile(validateInputs.model, space);
      bool defaultOk = aspo::exactTree(tree, space, space.defaults());
      std::printf("ok: %zu parameters, %llu configurations, %zu constraint leaves; default configuration %s\n",
                  space.paramCount(), static_cast<unsigned long long>(space.cardinality()), tree.leafCount(),
                  defaultOk ? "satisfies the constraints" : "violates the constraints");
      return Ok;
    }
  } catch (const aspo::ParseError& e) {
    std::cerr << "aspo: " << e.what() << '\n';
    return ConfigError;
  } catch (const aspo::Error& e) {
    std::cerr << "aspo: " << aspo::toString(e.kind()) << ": " << e.what() << '\n';
    return exitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "aspo: " << e.what() << '\n';
    return Failure;
  }
  return Ok;
}
