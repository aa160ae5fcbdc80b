#include "aspo/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

#include "aspo/error.hpp"
#include "aspo/log.hpp"

namespace aspo {

using nlohmann::json;

namespace {

const double kSqrt5 = std::sqrt(5.0);

// (5/3) * (1 + sqrt5 r) * exp(-sqrt5 r): -dk/dr / r for unit signal variance.
double maternRadialFactor(double r) { return (5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r); }

double scaledDistance(const Eigen::VectorXd& inv2, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::sqrt(((a - b).array().square() * inv2.array()).sum());
}

Eigen::MatrixXd kernelMatrix(const Eigen::MatrixXd& X, const KernelParams& p) {
  const Eigen::Index n = X.rows();
  Eigen::VectorXd inv2 = p.lengthscales.array().square().inverse();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = p.signalVariance;
    for (Eigen::Index j = 0; j < i; ++j) {
      double r = scaledDistance(inv2, X.row(i).transpose(), X.row(j).transpose());
      K(i, j) = K(j, i) = p.signalVariance * matern52(r);
    }
  }
  return K;
}

// Cholesky with jitter escalation. Returns false if it never succeeds.
bool factorWithJitter(const Eigen::MatrixXd& Kf, const Eigen::VectorXd& diag, double jitter0,
                      Eigen::LLT<Eigen::MatrixXd>& llt, double& jitterUsed) {
  for (double jitter = jitter0; jitter <= 1e-2 * (1 + 1e-9); jitter *= 10.0) {
    Eigen::MatrixXd K = Kf;
    K.diagonal() += diag + Eigen::VectorXd::Constant(diag.size(), jitter);
    llt.compute(K);
    if (llt.info() == Eigen::Success) {
      jitterUsed = jitter;
      return true;
    }
  }
  return false;
}

}  // namespace

KernelParams KernelParams::defaults(std::size_t dim) {
  KernelParams p;
  p.lengthscales = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), 0.5);
  return p;
}

void KernelParams::validate() const {
  if (lengthscales.size() == 0) throw Error(ErrorKind::InvalidArgument, "kernel needs at least one lengthscale");
  if ((lengthscales.array() <= 0.0).any() || !lengthscales.allFinite())
    throw Error(ErrorKind::InvalidArgument, "lengthscales must be positive");
  if (!(signalVariance > 0.0)) throw Error(ErrorKind::InvalidArgument, "signal variance must be positive");
  if (!(noiseVariance >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise variance must be non-negative");
  if (!(jitter > 0.0)) throw Error(ErrorKind::InvalidArgument, "jitter must be positive");
}

double matern52(double r) { return (1.0 + kSqrt5 * r + 5.0 * r * r / 3.0) * std::exp(-kSqrt5 * r); }

double maternArd52(const KernelParams& p, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() != p.lengthscales.size())
    throw Error(ErrorKind::DimensionMismatch, "kernel arguments and lengthscales differ in dimension");
  Eigen::VectorXd inv2 = p.lengthscales.array().square().inverse();
  return p.signalVariance * matern52(scaledDistance(inv2, a, b));
}

double kernelValue(const ParameterSpace& space, const KernelParams& p, const EncodedPoint& x,
                   const EncodedPoint& y) {
  return maternArd52(p, snap(space, x.coords()), snap(space, y.coords()));
}

double logMarginalLikelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelParams& p,
                             const Eigen::VectorXd& extraNoise, Eigen::VectorXd* gradLog, double* jitterUsed) {
  const Eigen::Index n = X.rows(), D = X.cols();
  Eigen::MatrixXd Kf = kernelMatrix(X, p);
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(n, p.noiseVariance);
  if (extraNoise.size() == n) diag += extraNoise;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = p.jitter;
  if (!factorWithJitter(Kf, diag, p.jitter, llt, jitter))
    throw Error(ErrorKind::NumericalFailure, "Cholesky factorization failed after jitter escalation");
  if (jitterUsed) *jitterUsed = jitter;
  Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd& L = llt.matrixLLT();
  double logDet = 2.0 * L.diagonal().array().log().sum();
  double lml = -0.5 * y.dot(alpha) - 0.5 * logDet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (gradLog) {
    Eigen::MatrixXd W = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
    gradLog->setZero(D + 2);
    Eigen::VectorXd inv2 = p.lengthscales.array().square().inverse();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        Eigen::VectorXd d2 = (X.row(i) - X.row(j)).transpose().array().square();
        double r = std::sqrt((d2.array() * inv2.array()).sum());
        double g = p.signalVariance * maternRadialFactor(r);
        // Off-diagonal pairs appear twice in the trace.
        double w = W(i, j);
        (*gradLog).head(D) += w * g * (d2.array() * inv2.array()).matrix();
      }
    }
    (*gradLog)[D] = 0.5 * (W.array() * Kf.array()).sum();
    (*gradLog)[D + 1] = 0.5 * p.noiseVariance * W.trace();
  }
  return lml;
}

namespace {

struct Bounds {
  Eigen::VectorXd lo, hi;
  Eigen::Index noiseIndex = -1;  // -1 when noise is held fixed
};

Eigen::VectorXd packLog(const KernelParams& p, bool withNoise) {
  Eigen::Index D = p.lengthscales.size();
  Eigen::VectorXd t(D + 1 + (withNoise ? 1 : 0));
  t.head(D) = p.lengthscales.array().log();
  t[D] = std::log(p.signalVariance);
  if (withNoise) t[D + 1] = std::log(p.noiseVariance);
  return t;
}

KernelParams unpackLog(const Eigen::VectorXd& t, const KernelParams& base, bool withNoise) {
  KernelParams p = base;
  Eigen::Index D = base.lengthscales.size();
  p.lengthscales = t.head(D).array().exp();
  p.signalVariance = std::exp(t[D]);
  if (withNoise) p.noiseVariance = std::exp(t[D + 1]);
  return p;
}

struct Ascent {
  Eigen::VectorXd theta;
  double value = -std::numeric_limits<double>::infinity();
};

// Projected gradient ascent with Barzilai-Borwein steps and Armijo
// backtracking. Infeasible factorizations count as -inf.
Ascent maximizeLml(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& extra,
                   const KernelParams& base, bool withNoise, Eigen::VectorXd theta, const Bounds& b,
                   int maxIterations) {
  Eigen::Index D = base.lengthscales.size();
  auto evaluate = [&](const Eigen::VectorXd& t, Eigen::VectorXd* g) {
    try {
      Eigen::VectorXd full;
      double v = logMarginalLikelihood(X, y, unpackLog(t, base, withNoise), extra, g ? &full : nullptr);
      if (g) *g = withNoise ? full : Eigen::VectorXd(full.head(D + 1));
      return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  auto project = [&](Eigen::VectorXd t) { return t.cwiseMax(b.lo).cwiseMin(b.hi); };

  theta = project(theta);
  Eigen::VectorXd grad;
  double f = evaluate(theta, &grad);
  if (!std::isfinite(f)) return {theta, f};
  double step = 0.1;
  Eigen::VectorXd prevTheta, prevGrad;
  for (int it = 0; it < maxIterations; ++it) {
    Eigen::VectorXd pg = project(theta + grad) - theta;
    if (pg.norm() < 1e-6) break;
    if (prevTheta.size()) {
      Eigen::VectorXd s = theta - prevTheta, yv = grad - prevGrad;
      double sy = s.dot(yv);
      if (sy < 0) step = std::clamp(-s.squaredNorm() / sy, 1e-4, 10.0);
    }
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      Eigen::VectorXd cand = project(theta + step * grad);
      Eigen::VectorXd candGrad;
      double fc = evaluate(cand, &candGrad);
      if (fc >= f + 1e-4 * grad.dot(cand - theta) && std::isfinite(fc)) {
        prevTheta = theta;
        prevGrad = grad;
        double gain = fc - f;
        theta = cand;
        grad = candGrad;
        f = fc;
        accepted = true;
        if (gain < 1e-10 * (1.0 + std::abs(f))) it = maxIterations;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return {theta, f};
}

}  // namespace

GpModel GpModel::fit(const ParameterSpace& space, std::span<const EncodedPoint> inputs,
                     std::span<const double> targets, const KernelParams& init, const GpFitOptions& opts) {
  if (inputs.size() != targets.size())
    throw Error(ErrorKind::InvalidArgument, "inputs and targets differ in length");
  if (inputs.size() < 2) throw Error(ErrorKind::InvalidArgument, "GP fit needs at least two training points");
  init.validate();
  const auto D = static_cast<Eigen::Index>(space.encodedDim());
  if (init.lengthscales.size() != D)
    throw Error(ErrorKind::DimensionMismatch, "lengthscale count does not match encoded dimension");

  GpModel m;
  m.space_ = space;
  m.snapInputs_ = opts.snapInputs;
  m.params_ = init;

  // Standardize over all observations, then merge duplicates.
  const double n = static_cast<double>(targets.size());
  double mean = 0.0;
  for (double t : targets) mean += t;
  mean /= n;
  double var = 0.0;
  for (double t : targets) var += (t - mean) * (t - mean);
  double sd = std::sqrt(var / n);
  if (!(sd > 1e-12) || !std::isfinite(sd)) sd = 1.0;
  m.mean_ = mean;
  m.std_ = sd;

  std::map<std::vector<double>, std::vector<double>> groups;
  std::vector<std::vector<double>> order;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].dim() != D) throw Error(ErrorKind::DimensionMismatch, "training input has wrong dimension");
    Eigen::VectorXd x = m.prepare(inputs[i].coords());
    std::vector<double> key(x.data(), x.data() + x.size());
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back((targets[i] - mean) / sd);
  }
  const auto rows = static_cast<Eigen::Index>(order.size());
  m.X_.resize(rows, D);
  m.y_.resize(rows);
  m.extraNoise_ = Eigen::VectorXd::Zero(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& key = order[static_cast<std::size_t>(r)];
    m.X_.row(r) = Eigen::Map<const Eigen::VectorXd>(key.data(), D).transpose();
    const auto& ys = groups[key];
    double avg = 0.0;
    for (double v : ys) avg += v;
    avg /= static_cast<double>(ys.size());
    double spread = 0.0;
    for (double v : ys) spread += (v - avg) * (v - avg);
    m.y_[r] = avg;
    m.extraNoise_[r] = spread / static_cast<double>(ys.size());
  }

  if (opts.optimizeHyperparameters) {
    bool withNoise = init.noiseVariance > 0.0;
    Bounds b;
    Eigen::Index P = D + 1 + (withNoise ? 1 : 0);
    b.lo = Eigen::VectorXd::Constant(P, std::log(opts.boundLo));
    b.hi = Eigen::VectorXd::Constant(P, std::log(opts.boundHi));
    if (withNoise) {
      b.lo[D + 1] = std::log(opts.noiseLo);
      b.hi[D + 1] = std::log(opts.noiseHi);
    }
    Ascent best;
    int bestIndex = -1;
    for (int r = 0; r < std::max(1, opts.restarts); ++r) {
      Eigen::VectorXd start = packLog(init, withNoise);
      if (r > 0) {
        std::mt19937_64 rng(opts.seed * 1000003ull + static_cast<std::uint64_t>(r));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (Eigen::Index k = 0; k < D; ++k) start[k] = std::log(0.05) + u(rng) * (std::log(5.0) - std::log(0.05));
        start[D] = std::log(0.3) + u(rng) * (std::log(3.0) - std::log(0.3));
      }
      Ascent a = maximizeLml(m.X_, m.y_, m.extraNoise_, init, withNoise, start, b, opts.maxIterations);
      // Strictly greater keeps the lowest restart index on ties.
      if (bestIndex < 0 || a.value > best.value) {
        best = a;
        bestIndex = r;
      }
    }
    if (std::isfinite(best.value)) m.params_ = unpackLog(best.theta, init, withNoise);
  }
  m.condition();
  return m;
}

Eigen::VectorXd GpModel::prepare(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != space_.encodedDim())
    throw Error(ErrorKind::DimensionMismatch, "query point has wrong dimension");
  return snapInputs_ ? snap(space_, x) : x;
}

void GpModel::condition() {
  double jitterUsed = params_.jitter;
  lml_ = aspo::logMarginalLikelihood(X_, y_, params_, extraNoise_, nullptr, &jitterUsed);
  params_.jitter = jitterUsed;
  Eigen::LLT<Eigen::MatrixXd> llt(gram());
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NumericalFailure, "Cholesky factorization failed");
  L_ = llt.matrixL();
  alpha_ = llt.solve(y_);
}

Eigen::MatrixXd GpModel::gram() const {
  Eigen::MatrixXd K = kernelMatrix(X_, params_);
  K.diagonal() += extraNoise_ + Eigen::VectorXd::Constant(X_.rows(), params_.noiseVariance + params_.jitter);
  return K;
}

Prediction GpModel::predictStandardized(const Eigen::VectorXd& xs) const {
  const Eigen::Index n = X_.rows();
  Eigen::VectorXd inv2 = params_.lengthscales.array().square().inverse();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i)
    k[i] = params_.signalVariance * matern52(scaledDistance(inv2, xs, X_.row(i).transpose()));
  Eigen::VectorXd v = L_.triangularView<Eigen::Lower>().solve(k);
  double var = params_.signalVariance - v.squaredNorm();
  if (var < 0.0) {
    if (var < -1e-10) logWarning("negative posterior variance " + std::to_string(var) + " clamped to zero");
    var = 0.0;
  }
  return {k.dot(alpha_), var};
}

Prediction GpModel::predict(const EncodedPoint& x) const {
  Prediction p = predictStandardized(prepare(x.coords()));
  return {mean_ + std_ * p.mean, std_ * std_ * p.variance};
}

double GpModel::latentVariance(const EncodedPoint& x) const { return predictStandardized(prepare(x.coords())).variance; }

Prediction GpModel::predictRelaxed(const Eigen::VectorXd& x, Eigen::VectorXd* dmean, Eigen::VectorXd* dvariance) const {
  if (static_cast<std::size_t>(x.size()) != space_.encodedDim())
    throw Error(ErrorKind::DimensionMismatch, "query point has wrong dimension");
  const Eigen::Index n = X_.rows(), D = X_.cols();
  Eigen::VectorXd inv2 = params_.lengthscales.array().square().inverse();
  Eigen::VectorXd k(n);
  Eigen::MatrixXd dk(n, D);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd diff = x - X_.row(i).transpose();
    double r = std::sqrt((diff.array().square() * inv2.array()).sum());
    k[i] = params_.signalVariance * matern52(r);
    dk.row(i) = (-params_.signalVariance * maternRadialFactor(r) * (diff.array() * inv2.array())).matrix().transpose();
  }
  Eigen::VectorXd v = L_.triangularView<Eigen::Lower>().solve(k);
  double var = params_.signalVariance - v.squaredNorm();
  bool clamped = false;
  if (var < 0.0) {
    var = 0.0;
    clamped = true;
  }
  if (dmean) *dmean = std_ * (dk.transpose() * alpha_);
  if (dvariance) {
    if (clamped) {
      dvariance->setZero(D);
    } else {
      Eigen::VectorXd kinv = L_.transpose().triangularView<Eigen::Upper>().solve(v);
      *dvariance = std_ * std_ * (-2.0 * (dk.transpose() * kinv));
    }
  }
  return {mean_ + std_ * k.dot(alpha_), std_ * std_ * var};
}

json GpModel::toJson() const {
  json inputs = json::array();
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(X_.cols()));
    for (Eigen::Index c = 0; c < X_.cols(); ++c) row[static_cast<std::size_t>(c)] = X_(i, c);
    inputs.push_back(row);
  }
  return {{"kernel",
           {{"type", "matern52-ard"},
            {"lengthscales", std::vector<double>(params_.lengthscales.data(),
                                                 params_.lengthscales.data() + params_.lengthscales.size())},
            {"signal_variance", params_.signalVariance},
            {"noise_variance", params_.noiseVariance},
            {"jitter", params_.jitter}}},
          {"snap_inputs", snapInputs_},
          {"target_mean", mean_},
          {"target_std", std_},
          {"inputs", inputs},
          {"standardized_targets", std::vector<double>(y_.data(), y_.data() + y_.size())},
          {"extra_noise", std::vector<double>(extraNoise_.data(), extraNoise_.data() + extraNoise_.size())},
          {"log_marginal_likelihood", lml_}};
}

GpModel GpModel::fromJson(const json& j, const ParameterSpace& space) {
  try {
    GpModel m;
    m.space_ = space;
    const auto& k = j.at("kernel");
    auto ls = k.at("lengthscales").get<std::vector<double>>();
    m.params_.lengthscales = Eigen::Map<Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
    m.params_.signalVariance = k.at("signal_variance").get<double>();
    m.params_.noiseVariance = k.at("noise_variance").get<double>();
    m.params_.jitter = k.at("jitter").get<double>();
    m.params_.validate();
    m.snapInputs_ = j.at("snap_inputs").get<bool>();
    m.mean_ = j.at("target_mean").get<double>();
    m.std_ = j.at("target_std").get<double>();
    auto rows = j.at("inputs").get<std::vector<std::vector<double>>>();
    auto ys = j.at("standardized_targets").get<std::vector<double>>();
    auto extra = j.at("extra_noise").get<std::vector<double>>();
    const auto D = static_cast<Eigen::Index>(space.encodedDim());
    if (rows.size() != ys.size() || rows.size() != extra.size() || ls.size() != space.encodedDim())
      throw Error(ErrorKind::DimensionMismatch, "model dump sizes are inconsistent");
    m.X_.resize(static_cast<Eigen::Index>(rows.size()), D);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != space.encodedDim()) throw Error(ErrorKind::DimensionMismatch, "model dump row width");
      for (Eigen::Index c = 0; c < D; ++c) m.X_(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
    m.y_ = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    m.extraNoise_ = Eigen::Map<Eigen::VectorXd>(extra.data(), static_cast<Eigen::Index>(extra.size()));
    m.condition();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("malformed model dump: ") + e.what());
  }
}

}  // namespace aspo
