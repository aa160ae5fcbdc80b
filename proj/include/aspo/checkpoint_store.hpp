#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "aspo/evaluation.hpp"
#include "aspo/param_space.hpp"

namespace aspo {

struct CheckpointRecord {
  Configuration config;
  EncodedPoint encoded;
  EvaluationResult metrics;
  std::string artifact;
  double synthesisMinutes = 1.0;
  std::string insertedAt;
};

/// Per-parameter weights of the matching distance. Non-negative, not all zero.
class DistanceWeights {
 public:
  DistanceWeights() = default;
  explicit DistanceWeights(std::vector<double> w);
  static DistanceWeights ones(std::size_t d) { return DistanceWeights(std::vector<double>(d, 1.0)); }

  const std::vector<double>& values() const { return w_; }
  double operator[](std::size_t i) const { return w_[i]; }
  std::size_t size() const { return w_.size(); }

  friend bool operator==(const DistanceWeights&, const DistanceWeights&) = default;

 private:
  std::vector<double> w_;
};

/// Sum over parameters of w_i * (feature difference)^2, where ordinal
/// features are scaled ranks and categorical features are 0/1 mismatch.
double weightedDistance(const ParameterSpace& space, const Configuration& x, const Configuration& q,
                        const DistanceWeights& w);

/// Same metric for an unsnapped encoded point: a categorical block
/// contributes half the squared distance between the relaxed block and the
/// record's one-hot vertex, which equals the mismatch indicator at vertices.
double relaxedWeightedDistance(const ParameterSpace& space, const Eigen::VectorXd& x, const Configuration& q,
                               const DistanceWeights& w, Eigen::VectorXd* grad = nullptr);

/// Insertion-ordered database of evaluated configurations. Single writer,
/// many readers; readers always see a whole record set.
class CheckpointStore {
 public:
  explicit CheckpointStore(ParameterSpace space);
  CheckpointStore(const CheckpointStore& other);
  CheckpointStore& operator=(const CheckpointStore& other);
  CheckpointStore(CheckpointStore&&) noexcept;
  CheckpointStore& operator=(CheckpointStore&&) noexcept;
  ~CheckpointStore();

  const ParameterSpace& space() const { return space_; }

  /// Duplicate configurations overwrite the stored record but keep its rank.
  void insert(CheckpointRecord record);
  std::optional<CheckpointRecord> lookup(const Configuration& cfg) const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::vector<CheckpointRecord> records() const;

  /// Nearest record under the weighted distance; ties go to the earliest
  /// inserted. Throws EmptyDatabase.
  CheckpointRecord matchConfig(const Configuration& x, const DistanceWeights& w) const;
  /// Index of the nearest record and its distance, without copying.
  std::pair<std::size_t, double> nearest(const Configuration& x, const DistanceWeights& w) const;

  /// Minimum weighted distance to any record; `emptyCost` when empty.
  double costEstimate(const Configuration& x, const DistanceWeights& w, double emptyCost = 1.0) const;
  /// Relaxed version of costEstimate for gradient-based search.
  double relaxedCostEstimate(const Eigen::VectorXd& x, const DistanceWeights& w, Eigen::VectorXd* grad,
                             double emptyCost = 1.0) const;

  /// One JSON object per line; appends nothing, rewrites the whole file.
  void save(const std::filesystem::path& path) const;
  static CheckpointStore load(const std::filesystem::path& path, const ParameterSpace& space);

 private:
  ParameterSpace space_;
  std::vector<CheckpointRecord> records_;
  std::unordered_map<Configuration, std::size_t, ConfigurationHash> index_;
  std::unique_ptr<std::shared_mutex> mutex_;
};

/// T_syn(x, y): minutes to synthesize x starting from the checkpoint of y.
using SynthesisTimeFn = std::function<double(const Configuration& x, const Configuration& reference)>;

struct WeightLearningOptions {
  std::uint64_t seed = 0;
  std::size_t subsetSize = 20;
  /// Step budget, in multiples of the parameter count.
  int sweeps = 3;
  std::vector<double> grid{0.1, 0.5, 1.0, 2.0, 10.0};
};

/// Sum over the subset of T_syn(q, nearest other subset member under w).
double leaveOneOutSynthesisTime(const ParameterSpace& space, const std::vector<Configuration>& subset,
                                const DistanceWeights& w, const SynthesisTimeFn& tsyn);

/// Greedy coordinate descent over a per-weight grid starting from all-ones:
/// each step applies the single-weight change with the largest strict
/// improvement of the leave-one-out time, so the most influential parameter
/// moves first. Equal leave-one-out times are ranked by the summed time to the
/// three nearest neighbours; remaining ties go to the lowest parameter index,
/// then the lowest grid value. Throws InsufficientRecords below 3 records.
DistanceWeights learnWeights(const CheckpointStore& db, const SynthesisTimeFn& tsyn,
                             const WeightLearningOptions& opts = {});

/// Stable 64-bit FNV-1a hash of a configuration, hex encoded, used to key artifacts.
std::string configurationDigest(const ParameterSpace& space, const Configuration& cfg);

}  // namespace aspo
