#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace aspo {

enum class ParamKind { Categorical, Ordinal };

/// A single admissible parameter value: a label for categoricals, an exact
/// integer for ordinals.
using ParamValue = std::variant<std::string, std::int64_t>;

std::string toString(const ParamValue& v);
nlohmann::json toJson(const ParamValue& v);

struct ParameterDef {
  std::string name;
  ParamKind kind = ParamKind::Ordinal;
  std::vector<ParamValue> values;
  ParamValue defaultValue;

  std::size_t levelCount() const { return values.size(); }
  std::optional<std::size_t> levelOf(const ParamValue& v) const;

  /// Numeric magnitude of an ordinal level.
  double numeric(std::size_t level) const;
  /// Scaled rank level/(count-1); 0 for single-valued parameters.
  double rank(std::size_t level) const;

  /// Throws InvalidArgument when the definition breaks its invariants.
  void validate() const;
};

/// One concrete design point. Stores the chosen level index of every
/// parameter in space order; the space gives the levels meaning.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::vector<std::size_t> levels) : levels_(std::move(levels)) {}

  const std::vector<std::size_t>& levels() const { return levels_; }
  std::size_t level(std::size_t param) const { return levels_.at(param); }
  void setLevel(std::size_t param, std::size_t level) { levels_.at(param) = level; }
  std::size_t size() const { return levels_.size(); }

  friend bool operator==(const Configuration&, const Configuration&) = default;
  friend auto operator<=>(const Configuration&, const Configuration&) = default;

 private:
  std::vector<std::size_t> levels_;
};

struct ConfigurationHash {
  std::size_t operator()(const Configuration& c) const noexcept;
};

/// Continuous image of a configuration in [0,1]^D.
class EncodedPoint {
 public:
  EncodedPoint() = default;
  /// Throws Domain if any coordinate lies outside [0,1] or is not finite.
  explicit EncodedPoint(Eigen::VectorXd coords);

  const Eigen::VectorXd& coords() const { return coords_; }
  Eigen::Index dim() const { return coords_.size(); }
  double operator[](Eigen::Index i) const { return coords_[i]; }

  friend bool operator==(const EncodedPoint& a, const EncodedPoint& b) {
    return a.coords_.size() == b.coords_.size() && a.coords_ == b.coords_;
  }

 private:
  Eigen::VectorXd coords_;
};

class ParameterSpace {
 public:
  ParameterSpace() = default;
  explicit ParameterSpace(std::vector<ParameterDef> params);

  static ParameterSpace fromJson(const nlohmann::json& j);
  static ParameterSpace fromFile(const std::filesystem::path& path);
  nlohmann::json toJson() const;

  const std::vector<ParameterDef>& params() const { return params_; }
  std::size_t paramCount() const { return params_.size(); }
  const ParameterDef& param(std::size_t i) const { return params_.at(i); }
  std::optional<std::size_t> indexOf(const std::string& name) const;

  /// Total encoded dimension D.
  std::size_t encodedDim() const { return encodedDim_; }
  /// First encoded coordinate of parameter i and how many it spans.
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }
  std::size_t width(std::size_t i) const;

  /// Number of configurations, saturating at UINT64_MAX.
  std::uint64_t cardinality() const;

  Configuration defaults() const;

  /// Name-to-value view of a configuration and its inverse. The inverse throws
  /// InvalidConfiguration on unknown names, missing names, or inadmissible values.
  std::map<std::string, ParamValue> assignments(const Configuration& cfg) const;
  Configuration fromAssignments(const std::map<std::string, ParamValue>& a) const;
  nlohmann::json configToJson(const Configuration& cfg) const;
  Configuration configFromJson(const nlohmann::json& j) const;

  /// Throws InvalidConfiguration unless cfg has one admissible level per parameter.
  void check(const Configuration& cfg) const;

  /// Per-parameter numeric magnitudes; NaN for categorical parameters.
  std::vector<double> numericValues(const Configuration& cfg) const;

  /// Row-major enumeration of configuration `index` in [0, cardinality()).
  Configuration configurationAt(std::uint64_t index) const;

  friend bool operator==(const ParameterSpace& a, const ParameterSpace& b);

 private:
  std::vector<ParameterDef> params_;
  std::vector<std::size_t> offsets_;
  std::size_t encodedDim_ = 0;
};

EncodedPoint encode(const ParameterSpace& space, const Configuration& cfg);
/// Projects every categorical block to its arg-max vertex (lowest index on
/// ties) and every ordinal coordinate to the nearest rank (lower on ties).
EncodedPoint snap(const ParameterSpace& space, const EncodedPoint& p);
Eigen::VectorXd snap(const ParameterSpace& space, const Eigen::VectorXd& p);
Configuration decode(const ParameterSpace& space, const EncodedPoint& p);

/// Piecewise-linear numeric value of an ordinal parameter at a relaxed
/// coordinate u in [0,1]; slope receives d(value)/du.
double relaxedOrdinalValue(const ParameterDef& def, double u, double* slope = nullptr);

}  // namespace aspo
