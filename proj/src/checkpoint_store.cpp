#include "aspo/checkpoint_store.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>

#include "aspo/error.hpp"

namespace aspo {

using nlohmann::json;

DistanceWeights::DistanceWeights(std::vector<double> w) : w_(std::move(w)) {
  bool anyPositive = false;
  for (double v : w_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "distance weights must be non-negative");
    anyPositive = anyPositive || v > 0.0;
  }
  if (!anyPositive) throw Error(ErrorKind::InvalidArgument, "distance weights must not all be zero");
}

namespace {

void checkWeights(const ParameterSpace& space, const DistanceWeights& w) {
  if (w.size() != space.paramCount())
    throw Error(ErrorKind::DimensionMismatch, "weight vector length does not match parameter count");
}

}  // namespace

double weightedDistance(const ParameterSpace& space, const Configuration& x, const Configuration& q,
                        const DistanceWeights& w) {
  if (x.size() != space.paramCount() || q.size() != space.paramCount())
    throw Error(ErrorKind::DimensionMismatch, "configurations do not belong to the same space");
  checkWeights(space, w);
  double d = 0.0;
  for (std::size_t i = 0; i < space.paramCount(); ++i) {
    const auto& p = space.param(i);
    double diff = p.kind == ParamKind::Categorical ? (x.level(i) == q.level(i) ? 0.0 : 1.0)
                                                   : p.rank(x.level(i)) - p.rank(q.level(i));
    d += w[i] * diff * diff;
  }
  return d;
}

double relaxedWeightedDistance(const ParameterSpace& space, const Eigen::VectorXd& x, const Configuration& q,
                               const DistanceWeights& w, Eigen::VectorXd* grad) {
  if (static_cast<std::size_t>(x.size()) != space.encodedDim())
    throw Error(ErrorKind::DimensionMismatch, "relaxed point has wrong dimension");
  checkWeights(space, w);
  if (grad) grad->setZero(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < space.paramCount(); ++i) {
    const auto& p = space.param(i);
    auto off = static_cast<Eigen::Index>(space.offset(i));
    if (p.kind == ParamKind::Categorical) {
      for (std::size_t k = 0; k < p.levelCount(); ++k) {
        auto c = off + static_cast<Eigen::Index>(k);
        double diff = x[c] - (k == q.level(i) ? 1.0 : 0.0);
        d += 0.5 * w[i] * diff * diff;
        if (grad) (*grad)[c] += w[i] * diff;
      }
    } else {
      double diff = x[off] - p.rank(q.level(i));
      d += w[i] * diff * diff;
      if (grad) (*grad)[off] += 2.0 * w[i] * diff;
    }
  }
  return d;
}

CheckpointStore::CheckpointStore(ParameterSpace space)
    : space_(std::move(space)), mutex_(std::make_unique<std::shared_mutex>()) {}

CheckpointStore::CheckpointStore(const CheckpointStore& other) : mutex_(std::make_unique<std::shared_mutex>()) {
  std::shared_lock lock(*other.mutex_);
  space_ = other.space_;
  records_ = other.records_;
  index_ = other.index_;
}

CheckpointStore& CheckpointStore::operator=(const CheckpointStore& other) {
  if (this != &other) {
    CheckpointStore copy(other);
    *this = std::move(copy);
  }
  return *this;
}

CheckpointStore::CheckpointStore(CheckpointStore&&) noexcept = default;
CheckpointStore& CheckpointStore::operator=(CheckpointStore&&) noexcept = default;
CheckpointStore::~CheckpointStore() = default;

void CheckpointStore::insert(CheckpointRecord record) {
  space_.check(record.config);
  if (!(record.synthesisMinutes > 0.0))
    throw Error(ErrorKind::InvalidArgument, "checkpoint record needs positive synthesis minutes");
  record.encoded = encode(space_, record.config);
  std::unique_lock lock(*mutex_);
  auto it = index_.find(record.config);
  if (it != index_.end()) {
    records_[it->second] = std::move(record);
    return;
  }
  index_.emplace(record.config, records_.size());
  records_.push_back(std::move(record));
}

std::optional<CheckpointRecord> CheckpointStore::lookup(const Configuration& cfg) const {
  std::shared_lock lock(*mutex_);
  auto it = index_.find(cfg);
  if (it == index_.end()) return std::nullopt;
  return records_[it->second];
}

std::size_t CheckpointStore::size() const {
  std::shared_lock lock(*mutex_);
  return records_.size();
}

std::vector<CheckpointRecord> CheckpointStore::records() const {
  std::shared_lock lock(*mutex_);
  return records_;
}

namespace {

std::pair<std::size_t, double> nearestUnlocked(const ParameterSpace& space, const std::vector<CheckpointRecord>& records,
                                               const Configuration& x, const DistanceWeights& w) {
  if (records.empty()) throw Error(ErrorKind::EmptyDatabase, "checkpoint database is empty");
  std::size_t best = 0;
  double bestD = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < records.size(); ++i) {
    double d = weightedDistance(space, x, records[i].config, w);
    if (d < bestD) {
      bestD = d;
      best = i;
    }
  }
  return {best, bestD};
}

}  // namespace

std::pair<std::size_t, double> CheckpointStore::nearest(const Configuration& x, const DistanceWeights& w) const {
  std::shared_lock lock(*mutex_);
  return nearestUnlocked(space_, records_, x, w);
}

CheckpointRecord CheckpointStore::matchConfig(const Configuration& x, const DistanceWeights& w) const {
  std::shared_lock lock(*mutex_);
  return records_[nearestUnlocked(space_, records_, x, w).first];
}

double CheckpointStore::costEstimate(const Configuration& x, const DistanceWeights& w, double emptyCost) const {
  std::shared_lock lock(*mutex_);
  if (records_.empty()) return emptyCost;
  return nearestUnlocked(space_, records_, x, w).second;
}

double CheckpointStore::relaxedCostEstimate(const Eigen::VectorXd& x, const DistanceWeights& w,
                                            Eigen::VectorXd* grad, double emptyCost) const {
  std::shared_lock lock(*mutex_);
  if (records_.empty()) {
    if (grad) grad->setZero(x.size());
    return emptyCost;
  }
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd g;
  for (const auto& r : records_) {
    double d = relaxedWeightedDistance(space_, x, r.config, w, grad ? &g : nullptr);
    if (d < best) {
      best = d;
      if (grad) *grad = g;
    }
  }
  return best;
}

void CheckpointStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint database " + path.string());
  std::shared_lock lock(*mutex_);
  for (const auto& r : records_) {
    json j = {{"config", space_.configToJson(r.config)},
              {"metrics", r.metrics.toJson()},
              {"synthesis_minutes", r.synthesisMinutes},
              {"artifact", r.artifact},
              {"inserted_at", r.insertedAt}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing checkpoint database " + path.string());
}

CheckpointStore CheckpointStore::load(const std::filesystem::path& path, const ParameterSpace& space) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint database " + path.string());
  CheckpointStore db(space);
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      CheckpointRecord r;
      r.config = space.configFromJson(j.at("config"));
      r.metrics = EvaluationResult::fromJson(j.at("metrics"));
      r.synthesisMinutes = j.at("synthesis_minutes").get<double>();
      r.artifact = j.at("artifact").get<std::string>();
      r.insertedAt = j.at("inserted_at").get<std::string>();
      db.insert(std::move(r));
    } catch (const json::exception& e) {
      // A torn trailing line from an interrupted append is dropped.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw ParseError(path.string() + ": line " + std::to_string(lineNo) + ": " + e.what(), lineNo, 1);
    }
  }
  return db;
}

double leaveOneOutSynthesisTime(const ParameterSpace& space, const std::vector<Configuration>& subset,
                                const DistanceWeights& w, const SynthesisTimeFn& tsyn) {
  double total = 0.0;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    std::size_t best = subset.size();
    double bestD = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < subset.size(); ++k) {
      if (k == i) continue;
      double d = weightedDistance(space, subset[i], subset[k], w);
      if (d < bestD) {
        bestD = d;
        best = k;
      }
    }
    if (best < subset.size()) total += tsyn(subset[i], subset[best]);
  }
  return total;
}

namespace {

// Learning objective: leave-one-out time to the nearest neighbour, then the
// summed time to the three nearest as a tie-break. The first is piecewise
// constant in w, so different moves often reach the same value; the second
// prefers the one that makes whole neighbourhoods cheap.
struct LooScore {
  double nearest = 0.0;
  double neighbourhood = 0.0;

  bool operator<(const LooScore& o) const {
    return nearest < o.nearest || (nearest == o.nearest && neighbourhood < o.neighbourhood);
  }
};

LooScore looScore(const ParameterSpace& space, const std::vector<Configuration>& subset, const DistanceWeights& w,
                  const SynthesisTimeFn& tsyn) {
  LooScore s;
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    d.clear();
    for (std::size_t k = 0; k < subset.size(); ++k)
      if (k != i) d.emplace_back(weightedDistance(space, subset[i], subset[k], w), k);
    if (d.empty()) continue;
    std::size_t top = std::min<std::size_t>(3, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(top), d.end());
    for (std::size_t j = 0; j < top; ++j) {
      double t = tsyn(subset[i], subset[d[j].second]);
      if (j == 0) s.nearest += t;
      s.neighbourhood += t;
    }
  }
  return s;
}

}  // namespace

DistanceWeights learnWeights(const CheckpointStore& db, const SynthesisTimeFn& tsyn, const WeightLearningOptions& opts) {
  auto records = db.records();
  if (records.size() < 3)
    throw Error(ErrorKind::InsufficientRecords, "weight learning needs at least 3 checkpoint records");
  const auto& space = db.space();

  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(opts.seed);
  std::size_t m = std::min(records.size(), std::max<std::size_t>(opts.subsetSize, 3));
  if (m < records.size()) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<Configuration> subset;
  for (auto i : idx) subset.push_back(records[i].config);

  std::vector<double> w(space.paramCount(), 1.0);
  LooScore best = looScore(space, subset, DistanceWeights(w), tsyn);
  const std::size_t maxSteps = static_cast<std::size_t>(std::max(opts.sweeps, 0)) * w.size();
  for (std::size_t step = 0; step < maxSteps; ++step) {
    std::size_t moveParam = w.size();
    double moveValue = 0.0;
    LooScore moveObj = best;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double current = w[i];
      for (double g : opts.grid) {
        if (g == current) continue;
        w[i] = g;
        LooScore obj = looScore(space, subset, DistanceWeights(w), tsyn);
        if (obj < moveObj) {
          moveObj = obj;
          moveParam = i;
          moveValue = g;
        }
      }
      w[i] = current;
    }
    if (moveParam == w.size()) break;
    w[moveParam] = moveValue;
    best = moveObj;
  }
  return DistanceWeights(w);
}

std::string configurationDigest(const ParameterSpace& space, const Configuration& cfg) {
  std::string canon = space.configToJson(cfg).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aspo
