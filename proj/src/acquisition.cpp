#include "aspo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "aspo/error.hpp"
#include "aspo/warm_start.hpp"

namespace aspo {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double normPdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double normCdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// z*Phi(z) + phi(z). For large negative z the direct form cancels, so use the
// continued fraction of the Mills ratio Phi(-u)/phi(u) with u = -z.
double eiFactor(double z) {
  if (z > -6.0) return z * normCdf(z) + normPdf(z);
  double u = -z;
  double cf = u;
  for (int k = 60; k >= 1; --k) cf = u + k / cf;
  double mills = 1.0 / cf;
  return normPdf(z) * (1.0 - u * mills);
}

}  // namespace

const char* toString(AcquisitionMode m) { return m == AcquisitionMode::PaperRatio ? "paper-ratio" : "exponent"; }

AcquisitionMode acquisitionModeFromString(const std::string& s) {
  if (s == "paper-ratio") return AcquisitionMode::PaperRatio;
  if (s == "exponent") return AcquisitionMode::Exponent;
  throw Error(ErrorKind::InvalidArgument, "unknown acquisition mode '" + s + "'");
}

void CoolingSchedule::validate() const {
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw Error(ErrorKind::InvalidArgument, "lambda0 must be positive");
  if (!(k >= 0.0) || !std::isfinite(k)) throw Error(ErrorKind::InvalidArgument, "cooling rate must be non-negative");
}

double coolingFactor(const CoolingSchedule& s, double t) {
  if (!(t >= 0.0)) throw Error(ErrorKind::InvalidArgument, "iteration must be non-negative");
  return s.lambda0 * std::exp(-s.k * t);
}

double expectedImprovement(double mean, double variance, double best, double* dMean, double* dStd) {
  double sigma = std::sqrt(std::max(variance, 0.0));
  double gain = best - mean;
  if (!(sigma > 0.0)) {
    if (dMean) *dMean = gain > 0.0 ? -1.0 : 0.0;
    if (dStd) *dStd = 0.0;
    return std::max(gain, 0.0);
  }
  double z = gain / sigma;
  if (dMean) *dMean = -normCdf(z);
  if (dStd) *dStd = normPdf(z);
  return std::max(sigma * eiFactor(z), 0.0);
}

double expectedImprovement(double mean, double variance, double best) {
  return expectedImprovement(mean, variance, best, nullptr, nullptr);
}

double expectedImprovement(const GpModel& model, const EncodedPoint& x, std::optional<double> bestFeasible) {
  Prediction p = model.predict(x);
  if (!bestFeasible) return std::sqrt(std::max(p.variance, 0.0));
  return expectedImprovement(p.mean, p.variance, *bestFeasible);
}

double coolAcquisition(double alpha, double cost, double lambda, AcquisitionMode mode) {
  double c = std::max(cost, kCostFloor);
  return mode == AcquisitionMode::PaperRatio ? alpha / (lambda * c) : alpha / std::pow(c, lambda);
}

double alphaCool(const AcquisitionContext& ctx, const ParameterSpace& space, const Configuration& x) {
  if (!ctx.model) throw Error(ErrorKind::InvalidArgument, "acquisition context has no model");
  double alpha = expectedImprovement(*ctx.model, encode(space, x), ctx.bestFeasible);
  double cost = ctx.cost ? ctx.cost(x) : 1.0;
  double lambda = coolingFactor(ctx.schedule, static_cast<double>(ctx.iteration));
  return coolAcquisition(alpha, cost, lambda, ctx.schedule.mode);
}

double alphaCoolRelaxed(const AcquisitionContext& ctx, const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
  if (!ctx.model) throw Error(ErrorKind::InvalidArgument, "acquisition context has no model");
  Eigen::VectorXd dm, dv;
  Prediction p = ctx.model->predictRelaxed(x, grad ? &dm : nullptr, grad ? &dv : nullptr);
  double sigma = std::sqrt(std::max(p.variance, 0.0));
  double alpha, dMean = 0.0, dStd = 0.0;
  if (ctx.bestFeasible) {
    alpha = expectedImprovement(p.mean, p.variance, *ctx.bestFeasible, &dMean, &dStd);
  } else {
    alpha = sigma;
    dStd = 1.0;
  }
  Eigen::VectorXd dAlpha;
  if (grad) {
    dAlpha = dMean * dm;
    if (sigma > 0.0) dAlpha += (dStd / (2.0 * sigma)) * dv;
  }

  double lambda = coolingFactor(ctx.schedule, static_cast<double>(ctx.iteration));
  Eigen::VectorXd dc;
  double cost = 1.0;
  if (ctx.relaxedCost) cost = ctx.relaxedCost(x, grad ? &dc : nullptr);
  bool floored = cost <= kCostFloor;
  double c = std::max(cost, kCostFloor);

  double h = ctx.schedule.mode == AcquisitionMode::PaperRatio ? 1.0 / (lambda * c) : std::pow(c, -lambda);
  if (grad) {
    *grad = h * dAlpha;
    if (ctx.relaxedCost && !floored && dc.size() == x.size()) {
      double dh = ctx.schedule.mode == AcquisitionMode::PaperRatio ? -h / c : -lambda * h / c;
      *grad += (alpha * dh) * dc;
    }
  }
  double value = alpha * h;
  return value;
}

double relaxedConstraintValue(const ParameterSpace& space, const ConstraintTree& tree, const Eigen::VectorXd& x,
                              Eigen::VectorXd* grad) {
  const std::size_t P = space.paramCount();
  std::vector<double> values(P, 0.0), slopes(P, 0.0);
  for (std::size_t i = 0; i < P; ++i) {
    const auto& def = space.param(i);
    if (def.kind == ParamKind::Ordinal)
      values[i] = relaxedOrdinalValue(def, x[static_cast<Eigen::Index>(space.offset(i))], &slopes[i]);
  }
  if (!grad) return smoothTree(tree, values);
  std::vector<double> g(P, 0.0);
  double v = smoothTreeWithGradient(tree, values, g);
  grad->setZero(x.size());
  for (std::size_t i = 0; i < P; ++i)
    if (space.param(i).kind == ParamKind::Ordinal) (*grad)[static_cast<Eigen::Index>(space.offset(i))] = g[i] * slopes[i];
  return v;
}

namespace {

Eigen::VectorXd uniformPoint(std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = u(rng);
  return x;
}

struct Objective {
  const AcquisitionContext& ctx;
  const ParameterSpace& space;
  const ConstraintTree& tree;
  bool vanilla;

  double value(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    if (!vanilla) return alphaCoolRelaxed(ctx, x, grad);
    AcquisitionContext plain;
    plain.model = ctx.model;
    plain.bestFeasible = ctx.bestFeasible;
    plain.schedule = CoolingSchedule{1.0, 0.0, AcquisitionMode::PaperRatio};
    return alphaCoolRelaxed(plain, x, grad);
  }

  bool constrained() const { return !vanilla && !tree.empty(); }

  double constraint(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    if (!constrained()) {
      if (grad) grad->setZero(x.size());
      return std::numeric_limits<double>::infinity();
    }
    return relaxedConstraintValue(space, tree, x, grad);
  }
};

// Trust-region ascent with a single linearized constraint: step along the
// normalized objective gradient, then project the step onto the linearized
// feasible half-space and clip to the box. Infeasible iterates accept any step
// that improves the constraint; feasible ones need to stay feasible and
// improve the objective.
Eigen::VectorXd localSearch(const Objective& obj, Eigen::VectorXd x, int maxSteps, double* finalValue) {
  Eigen::VectorXd gf, gg;
  double f = obj.value(x, &gf);
  double g = obj.constraint(x, &gg);
  double eta = 0.2;
  for (int step = 0; step < maxSteps && eta >= 1e-4; ++step) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(x.size());
    double gn = gf.norm();
    if (gn > 0.0 && std::isfinite(gn)) d = (eta / gn) * gf;
    if (std::isfinite(g)) {
      double lin = g + gg.dot(d);
      double gg2 = gg.squaredNorm();
      if (lin < 0.0 && gg2 > 0.0) d += (-lin / gg2) * gg;
    }
    Eigen::VectorXd xn = (x + d).cwiseMax(0.0).cwiseMin(1.0);
    if ((xn - x).norm() < 1e-12) break;
    Eigen::VectorXd gfn, ggn;
    double fn = obj.value(xn, &gfn);
    double cn = obj.constraint(xn, &ggn);
    bool accept = g < 0.0 ? cn > g : (cn >= 0.0 && fn > f);
    if (accept) {
      x = std::move(xn);
      f = fn;
      g = cn;
      gf = std::move(gfn);
      gg = std::move(ggn);
      eta = std::min(0.5, eta * 1.5);
    } else {
      eta *= 0.5;
    }
  }
  if (finalValue) *finalValue = f;
  return x;
}

class ExactAcquisition {
 public:
  ExactAcquisition(const AcquisitionContext& ctx, const ParameterSpace& space) : ctx_(ctx), space_(space) {}
  double operator()(const Configuration& c) {
    auto it = cache_.find(c);
    if (it != cache_.end()) return it->second;
    double v = alphaCool(ctx_, space_, c);
    cache_.emplace(c, v);
    return v;
  }

 private:
  const AcquisitionContext& ctx_;
  const ParameterSpace& space_;
  std::unordered_map<Configuration, double, ConfigurationHash> cache_;
};

}  // namespace

AcquisitionResult maximizeAcquisition(const AcquisitionContext& ctx, const ParameterSpace& space,
                                      const ConstraintTree& tree, const AcquisitionOptions& opts) {
  if (!ctx.model) throw Error(ErrorKind::InvalidArgument, "acquisition context has no model");
  ctx.schedule.validate();
  if (tree.paramCount != space.paramCount())
    throw Error(ErrorKind::DimensionMismatch, "constraint tree was built for a different space");

  std::mt19937_64 rng(opts.seed);
  std::vector<Eigen::VectorXd> starts;
  for (const auto& c : opts.starts) starts.push_back(encode(space, c).coords());
  for (std::size_t i = 0; i < opts.randomStarts; ++i) starts.push_back(uniformPoint(space.encodedDim(), rng));

  auto excluded = [&](const Configuration& c) { return opts.exclude && opts.exclude(c); };
  Objective obj{ctx, space, tree, opts.vanilla};

  if (opts.vanilla) {
    // Rank snapped local optima by their relaxed value; skip repeats.
    std::optional<AcquisitionResult> best;
    for (const auto& s : starts) {
      double v = 0.0;
      Eigen::VectorXd x = localSearch(obj, s, opts.maxSteps, &v);
      Configuration c = decode(space, EncodedPoint(x));
      if (excluded(c)) continue;
      if (!best || v > best->value) best = AcquisitionResult{c, v, false};
    }
    if (best) return *best;
  } else {
    ExactAcquisition exact(ctx, space);
    auto feasible = [&](const Configuration& c) { return exactTree(tree, space, c); };
    std::optional<AcquisitionResult> best;
    std::unordered_set<Configuration, ConfigurationHash> polished;
    for (const auto& s : starts) {
      Eigen::VectorXd x = localSearch(obj, s, opts.maxSteps, nullptr);
      Configuration c = decode(space, EncodedPoint(x));
      if (!feasible(c) || !polished.insert(c).second) continue;

      // Single-parameter polish on the exact acquisition, restricted to
      // feasible configurations that may be returned.
      double cur = excluded(c) ? -std::numeric_limits<double>::infinity() : exact(c);
      for (int step = 0; step < 1000; ++step) {
        std::optional<Configuration> move;
        double moveValue = cur;
        for (std::size_t p = 0; p < space.paramCount(); ++p) {
          for (std::size_t l = 0; l < space.param(p).levelCount(); ++l) {
            if (l == c.level(p)) continue;
            Configuration n = c;
            n.setLevel(p, l);
            if (excluded(n) || !feasible(n)) continue;
            double v = exact(n);
            if (v > moveValue) {
              moveValue = v;
              move = n;
            }
          }
        }
        if (!move) break;
        c = *move;
        cur = moveValue;
      }
      if (excluded(c)) continue;
      if (!best || cur > best->value) best = AcquisitionResult{c, cur, false};
    }
    if (best) return *best;
  }

  std::mt19937_64 fallbackRng(opts.seed ^ 0xa5a5a5a5a5a5a5a5ull);
  for (std::size_t i = 0; i < opts.fallbackDraws; ++i) {
    Configuration c = randomConfiguration(space, fallbackRng);
    if (excluded(c)) continue;
    if (!opts.vanilla && !exactTree(tree, space, c)) continue;
    double v = opts.vanilla ? expectedImprovement(*ctx.model, encode(space, c), ctx.bestFeasible) : alphaCool(ctx, space, c);
    return AcquisitionResult{c, v, true};
  }
  throw Error(ErrorKind::NoFeasibleCandidate, "no feasible, unevaluated configuration found");
}

}  // namespace aspo
