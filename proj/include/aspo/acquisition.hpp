#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aspo/constraints.hpp"
#include "aspo/gp.hpp"
#include "aspo/param_space.hpp"

namespace aspo {

/// paper-ratio: alpha / (lambda(t) * c). exponent: alpha / c^lambda(t).
enum class AcquisitionMode { PaperRatio, Exponent };

const char* toString(AcquisitionMode m);
AcquisitionMode acquisitionModeFromString(const std::string& s);

struct CoolingSchedule {
  double lambda0 = 1.0;
  double k = 0.1;
  AcquisitionMode mode = AcquisitionMode::PaperRatio;

  void validate() const;
};

/// lambda0 * exp(-k t).
double coolingFactor(const CoolingSchedule& s, double t);

/// Floor applied to the cost estimate before dividing by it.
inline constexpr double kCostFloor = 1e-6;

/// Expected improvement below `best` (minimization) of a normal with the
/// given mean and variance. Returns max(best - mean, 0) at zero variance.
double expectedImprovement(double mean, double variance, double best);
/// Same, with partial derivatives in the mean and the standard deviation.
double expectedImprovement(double mean, double variance, double best, double* dMean, double* dStd);
/// EI of the model's posterior at x; without an incumbent, the posterior
/// standard deviation.
double expectedImprovement(const GpModel& model, const EncodedPoint& x, std::optional<double> bestFeasible);

/// Combines an acquisition value with a cost estimate at cooling factor lambda.
double coolAcquisition(double alpha, double cost, double lambda, AcquisitionMode mode);

using CostFn = std::function<double(const Configuration&)>;
/// Relaxed cost on an unsnapped encoded point; fills the gradient if asked.
using RelaxedCostFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct AcquisitionContext {
  const GpModel* model = nullptr;
  std::optional<double> bestFeasible;
  /// Cost estimate; absent means unit cost everywhere.
  CostFn cost;
  RelaxedCostFn relaxedCost;
  CoolingSchedule schedule;
  std::size_t iteration = 0;
};

/// alpha_cool at a concrete configuration.
double alphaCool(const AcquisitionContext& ctx, const ParameterSpace& space, const Configuration& x);
/// alpha_cool at an unsnapped point, using the relaxed posterior and cost.
double alphaCoolRelaxed(const AcquisitionContext& ctx, const Eigen::VectorXd& x, Eigen::VectorXd* grad);

/// Tree value at an unsnapped point: ordinal coordinates map to numeric values
/// by piecewise-linear interpolation between admissible values. The gradient
/// is with respect to the encoded coordinates.
double relaxedConstraintValue(const ParameterSpace& space, const ConstraintTree& tree, const Eigen::VectorXd& x,
                              Eigen::VectorXd* grad);

struct AcquisitionOptions {
  std::uint64_t seed = 0;
  /// Extra local-search starts, typically the warm-start design.
  std::vector<Configuration> starts;
  std::size_t randomStarts = 32;
  int maxSteps = 100;
  /// Configurations that must not be returned (already evaluated).
  std::function<bool(const Configuration&)> exclude;
  /// Unconstrained, cost-free search of plain EI on the relaxed point, snapped
  /// only at the end. Used by the vanilla baseline.
  bool vanilla = false;
  std::size_t fallbackDraws = 100000;
};

struct AcquisitionResult {
  Configuration config;
  double value = 0.0;
  /// True when the local searches produced nothing usable and the result came
  /// from rejection sampling.
  bool fallback = false;
};

/// Multi-start constrained local search of alpha_cool over [0,1]^D followed
/// by snapping and a single-parameter polish on the exact acquisition. Only
/// exact-feasible, non-excluded configurations are returned; ties go to the
/// lowest start index. Throws NoFeasibleCandidate when rejection sampling
/// also finds nothing.
AcquisitionResult maximizeAcquisition(const AcquisitionContext& ctx, const ParameterSpace& space,
                                      const ConstraintTree& tree, const AcquisitionOptions& opts = {});

}  // namespace aspo
