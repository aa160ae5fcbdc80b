#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Core>
#include <json.hpp>

#include "aspo/param_space.hpp"

namespace aspo {

/// Hyperparameters of the ARD Matern-5/2 covariance.
struct KernelParams {
  Eigen::VectorXd lengthscales;
  double signalVariance = 1.0;
  double noiseVariance = 1e-6;
  double jitter = 1e-8;

  /// Lengthscales 0.5, signal variance 1, noise 1e-6.
  static KernelParams defaults(std::size_t dim);
  void validate() const;
};

/// Closed-form Matern-5/2 correlation at scaled distance r (signal variance 1).
double matern52(double r);

/// Base kernel on raw coordinates.
double maternArd52(const KernelParams& p, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Snap-composed kernel K'(x,y) = K_base(snap(x), snap(y)).
double kernelValue(const ParameterSpace& space, const KernelParams& p, const EncodedPoint& x, const EncodedPoint& y);

/// Log marginal likelihood of standardized targets y at inputs X (one row per
/// point) and, optionally, its gradient with respect to the log
/// hyperparameters ordered [log lengthscales..., log signalVariance,
/// log noiseVariance]. extraNoise adds per-point diagonal noise and may be
/// empty. Jitter is escalated x10 up to 1e-2; `jitterUsed` reports the final
/// value. Throws NumericalFailure if factorization still fails.
double logMarginalLikelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelParams& p,
                             const Eigen::VectorXd& extraNoise, Eigen::VectorXd* gradLog = nullptr,
                             double* jitterUsed = nullptr);

struct GpFitOptions {
  int restarts = 5;
  std::uint64_t seed = 0;
  int maxIterations = 150;
  bool optimizeHyperparameters = true;
  /// Composes the kernel with snap. Disabled only by the vanilla baseline.
  bool snapInputs = true;
  double boundLo = 1e-3;
  double boundHi = 1e3;
  double noiseLo = 1e-10;
  double noiseHi = 1.0;
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

class GpModel {
 public:
  /// Fits hyperparameters by multi-start projected gradient ascent on the log
  /// marginal likelihood (in log space, box-bounded), then conditions on the
  /// data. Duplicate inputs after snapping are merged: targets averaged, their
  /// spread added as local noise.
  static GpModel fit(const ParameterSpace& space, std::span<const EncodedPoint> inputs,
                     std::span<const double> targets, const KernelParams& init, const GpFitOptions& opts = {});

  /// Posterior at x in target units, using the snap-composed kernel.
  Prediction predict(const EncodedPoint& x) const;
  /// Posterior at an unsnapped point with gradients of mean and variance.
  Prediction predictRelaxed(const Eigen::VectorXd& x, Eigen::VectorXd* dmean = nullptr,
                            Eigen::VectorXd* dvariance = nullptr) const;
  /// Posterior variance of the standardized latent function.
  double latentVariance(const EncodedPoint& x) const;

  const KernelParams& params() const { return params_; }
  double logMarginalLikelihood() const { return lml_; }
  const Eigen::MatrixXd& trainingInputs() const { return X_; }
  const Eigen::VectorXd& trainingTargets() const { return y_; }
  const Eigen::VectorXd& extraNoise() const { return extraNoise_; }
  const Eigen::MatrixXd& choleskyFactor() const { return L_; }
  double targetMean() const { return mean_; }
  double targetStd() const { return std_; }
  bool snapsInputs() const { return snapInputs_; }
  std::size_t size() const { return static_cast<std::size_t>(X_.rows()); }
  const ParameterSpace& space() const { return space_; }

  /// Gram matrix K'(X,X) + noise + jitter, the matrix the factor reproduces.
  Eigen::MatrixXd gram() const;

  nlohmann::json toJson() const;
  static GpModel fromJson(const nlohmann::json& j, const ParameterSpace& space);

 private:
  void condition();
  Eigen::VectorXd prepare(const Eigen::VectorXd& x) const;
  Prediction predictStandardized(const Eigen::VectorXd& x) const;

  ParameterSpace space_;
  bool snapInputs_ = true;
  KernelParams params_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  Eigen::VectorXd extraNoise_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd alpha_;
  double mean_ = 0.0;
  double std_ = 1.0;
  double lml_ = 0.0;
};

}  // namespace aspo
