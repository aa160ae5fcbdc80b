#include "aspo/param_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "aspo/error.hpp"

namespace aspo {

using nlohmann::json;

std::string toString(const ParamValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return std::to_string(std::get<std::int64_t>(v));
}

json toJson(const ParamValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return std::get<std::int64_t>(v);
}

std::optional<std::size_t> ParameterDef::levelOf(const ParamValue& v) const {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] == v) return i;
  return std::nullopt;
}

double ParameterDef::numeric(std::size_t level) const {
  if (kind != ParamKind::Ordinal)
    throw Error(ErrorKind::TypeMismatch, "parameter '" + name + "' is categorical");
  return static_cast<double>(std::get<std::int64_t>(values.at(level)));
}

double ParameterDef::rank(std::size_t level) const {
  if (values.size() <= 1) return 0.0;
  return static_cast<double>(level) / static_cast<double>(values.size() - 1);
}

void ParameterDef::validate() const {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::InvalidArgument, "parameter '" + name + "': " + why);
  };
  if (name.empty()) throw Error(ErrorKind::InvalidArgument, "parameter with empty name");
  if (values.empty()) fail("no admissible values");
  for (const auto& v : values) {
    bool isInt = std::holds_alternative<std::int64_t>(v);
    if (kind == ParamKind::Ordinal && !isInt) fail("ordinal values must be integers");
    if (kind == ParamKind::Categorical && isInt) fail("categorical values must be strings");
  }
  std::set<ParamValue> seen(values.begin(), values.end());
  if (seen.size() != values.size()) fail("duplicate values");
  if (kind == ParamKind::Ordinal) {
    for (std::size_t i = 1; i < values.size(); ++i)
      if (std::get<std::int64_t>(values[i]) <= std::get<std::int64_t>(values[i - 1]))
        fail("ordinal values must be strictly increasing");
  }
  if (!levelOf(defaultValue)) fail("default '" + toString(defaultValue) + "' is not admissible");
}

std::size_t ConfigurationHash::operator()(const Configuration& c) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (auto l : c.levels()) {
    h ^= static_cast<std::uint64_t>(l) + 0x9e3779b97f4a7c15ull;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

EncodedPoint::EncodedPoint(Eigen::VectorXd coords) : coords_(std::move(coords)) {
  for (Eigen::Index i = 0; i < coords_.size(); ++i) {
    double c = coords_[i];
    if (!std::isfinite(c) || c < 0.0 || c > 1.0) {
      std::ostringstream os;
      os << "encoded coordinate " << i << " = " << c << " outside [0,1]";
      throw Error(ErrorKind::Domain, os.str());
    }
  }
}

ParameterSpace::ParameterSpace(std::vector<ParameterDef> params) : params_(std::move(params)) {
  std::set<std::string> names;
  for (const auto& p : params_) {
    p.validate();
    if (!names.insert(p.name).second)
      throw Error(ErrorKind::InvalidArgument, "duplicate parameter name '" + p.name + "'");
    offsets_.push_back(encodedDim_);
    encodedDim_ += p.kind == ParamKind::Categorical ? p.values.size() : 1;
  }
}

namespace {

ParamValue valueFromJson(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::floor(d) == d) return static_cast<std::int64_t>(d);
  }
  throw Error(ErrorKind::InvalidArgument, where + ": value must be a string or an integer");
}

}  // namespace

ParameterSpace ParameterSpace::fromJson(const json& j) {
  if (!j.is_object() || !j.contains("parameters") || !j["parameters"].is_array())
    throw Error(ErrorKind::InvalidArgument, "space definition needs a 'parameters' array");
  std::vector<ParameterDef> defs;
  for (const auto& pj : j["parameters"]) {
    ParameterDef d;
    d.name = pj.value("name", "");
    std::string kind = pj.value("kind", "");
    if (kind == "ordinal") d.kind = ParamKind::Ordinal;
    else if (kind == "categorical") d.kind = ParamKind::Categorical;
    else throw Error(ErrorKind::InvalidArgument, "parameter '" + d.name + "': unknown kind '" + kind + "'");
    if (!pj.contains("values") || !pj["values"].is_array())
      throw Error(ErrorKind::InvalidArgument, "parameter '" + d.name + "': missing values");
    for (const auto& v : pj["values"]) d.values.push_back(valueFromJson(v, d.name));
    if (!pj.contains("default"))
      throw Error(ErrorKind::InvalidArgument, "parameter '" + d.name + "': missing default");
    d.defaultValue = valueFromJson(pj["default"], d.name);
    defs.push_back(std::move(d));
  }
  return ParameterSpace(std::move(defs));
}

ParameterSpace ParameterSpace::fromFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open space file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return fromJson(j);
}

json ParameterSpace::toJson() const {
  json params = json::array();
  for (const auto& p : params_) {
    json vals = json::array();
    for (const auto& v : p.values) vals.push_back(aspo::toJson(v));
    params.push_back({{"name", p.name},
                      {"kind", p.kind == ParamKind::Ordinal ? "ordinal" : "categorical"},
                      {"values", vals},
                      {"default", aspo::toJson(p.defaultValue)}});
  }
  return {{"parameters", params}};
}

std::optional<std::size_t> ParameterSpace::indexOf(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  return std::nullopt;
}

std::size_t ParameterSpace::width(std::size_t i) const {
  const auto& p = params_.at(i);
  return p.kind == ParamKind::Categorical ? p.values.size() : 1;
}

std::uint64_t ParameterSpace::cardinality() const {
  std::uint64_t n = 1;
  for (const auto& p : params_) {
    if (n > std::numeric_limits<std::uint64_t>::max() / p.values.size())
      return std::numeric_limits<std::uint64_t>::max();
    n *= p.values.size();
  }
  return n;
}

Configuration ParameterSpace::defaults() const {
  std::vector<std::size_t> levels;
  for (const auto& p : params_) levels.push_back(*p.levelOf(p.defaultValue));
  return Configuration(std::move(levels));
}

std::map<std::string, ParamValue> ParameterSpace::assignments(const Configuration& cfg) const {
  check(cfg);
  std::map<std::string, ParamValue> out;
  for (std::size_t i = 0; i < params_.size(); ++i) out[params_[i].name] = params_[i].values[cfg.level(i)];
  return out;
}

Configuration ParameterSpace::fromAssignments(const std::map<std::string, ParamValue>& a) const {
  for (const auto& [name, _] : a)
    if (!indexOf(name))
      throw Error(ErrorKind::InvalidConfiguration, "unknown parameter '" + name + "'");
  std::vector<std::size_t> levels;
  for (const auto& p : params_) {
    auto it = a.find(p.name);
    if (it == a.end())
      throw Error(ErrorKind::InvalidConfiguration, "no value for parameter '" + p.name + "'");
    auto level = p.levelOf(it->second);
    if (!level)
      throw Error(ErrorKind::InvalidConfiguration,
                  "value '" + toString(it->second) + "' is not admissible for '" + p.name + "'");
    levels.push_back(*level);
  }
  return Configuration(std::move(levels));
}

json ParameterSpace::configToJson(const Configuration& cfg) const {
  check(cfg);
  json j = json::object();
  for (std::size_t i = 0; i < params_.size(); ++i)
    j[params_[i].name] = aspo::toJson(params_[i].values[cfg.level(i)]);
  return j;
}

Configuration ParameterSpace::configFromJson(const json& j) const {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfiguration, "configuration must be a JSON object");
  std::map<std::string, ParamValue> a;
  for (const auto& [k, v] : j.items()) {
    try {
      a[k] = valueFromJson(v, k);
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidConfiguration, e.what());
    }
  }
  return fromAssignments(a);
}

void ParameterSpace::check(const Configuration& cfg) const {
  if (cfg.size() != params_.size())
    throw Error(ErrorKind::InvalidConfiguration, "configuration has " + std::to_string(cfg.size()) +
                                                     " assignments, space has " +
                                                     std::to_string(params_.size()) + " parameters");
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (cfg.level(i) >= params_[i].values.size())
      throw Error(ErrorKind::InvalidConfiguration, "level out of range for '" + params_[i].name + "'");
}

std::vector<double> ParameterSpace::numericValues(const Configuration& cfg) const {
  check(cfg);
  std::vector<double> out(params_.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].kind == ParamKind::Ordinal) out[i] = params_[i].numeric(cfg.level(i));
  return out;
}

Configuration ParameterSpace::configurationAt(std::uint64_t index) const {
  std::vector<std::size_t> levels(params_.size());
  for (std::size_t i = params_.size(); i-- > 0;) {
    std::uint64_t n = params_[i].values.size();
    levels[i] = static_cast<std::size_t>(index % n);
    index /= n;
  }
  return Configuration(std::move(levels));
}

bool operator==(const ParameterSpace& a, const ParameterSpace& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    const auto& p = a.params_[i];
    const auto& q = b.params_[i];
    if (p.name != q.name || p.kind != q.kind || p.values != q.values || p.defaultValue != q.defaultValue)
      return false;
  }
  return true;
}

EncodedPoint encode(const ParameterSpace& space, const Configuration& cfg) {
  space.check(cfg);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.encodedDim()));
  for (std::size_t i = 0; i < space.paramCount(); ++i) {
    const auto& p = space.param(i);
    auto off = static_cast<Eigen::Index>(space.offset(i));
    if (p.kind == ParamKind::Categorical)
      x[off + static_cast<Eigen::Index>(cfg.level(i))] = 1.0;
    else
      x[off] = p.rank(cfg.level(i));
  }
  return EncodedPoint(std::move(x));
}

namespace {

void checkDim(const ParameterSpace& space, Eigen::Index dim) {
  if (static_cast<std::size_t>(dim) != space.encodedDim())
    throw Error(ErrorKind::DimensionMismatch, "point has dimension " + std::to_string(dim) +
                                                  ", space expects " +
                                                  std::to_string(space.encodedDim()));
}

std::size_t argmaxBlock(const Eigen::VectorXd& p, Eigen::Index off, std::size_t width) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < width; ++k)
    if (p[off + static_cast<Eigen::Index>(k)] > p[off + static_cast<Eigen::Index>(best)]) best = k;
  return best;
}

std::size_t nearestRank(double u, std::size_t count) {
  if (count <= 1) return 0;
  double x = u * static_cast<double>(count - 1);
  double level = std::ceil(x - 0.5);
  return static_cast<std::size_t>(std::clamp(level, 0.0, static_cast<double>(count - 1)));
}

}  // namespace

Eigen::VectorXd snap(const ParameterSpace& space, const Eigen::VectorXd& p) {
  checkDim(space, p.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p.size());
  for (std::size_t i = 0; i < space.paramCount(); ++i) {
    const auto& def = space.param(i);
    auto off = static_cast<Eigen::Index>(space.offset(i));
    if (def.kind == ParamKind::Categorical)
      out[off + static_cast<Eigen::Index>(argmaxBlock(p, off, def.values.size()))] = 1.0;
    else
      out[off] = def.rank(nearestRank(p[off], def.values.size()));
  }
  return out;
}

EncodedPoint snap(const ParameterSpace& space, const EncodedPoint& p) {
  return EncodedPoint(snap(space, p.coords()));
}

Configuration decode(const ParameterSpace& space, const EncodedPoint& p) {
  checkDim(space, p.dim());
  std::vector<std::size_t> levels(space.paramCount());
  for (std::size_t i = 0; i < space.paramCount(); ++i) {
    const auto& def = space.param(i);
    auto off = static_cast<Eigen::Index>(space.offset(i));
    levels[i] = def.kind == ParamKind::Categorical ? argmaxBlock(p.coords(), off, def.values.size())
                                                   : nearestRank(p[off], def.values.size());
  }
  return Configuration(std::move(levels));
}

double relaxedOrdinalValue(const ParameterDef& def, double u, double* slope) {
  std::size_t n = def.values.size();
  if (n == 1) {
    if (slope) *slope = 0.0;
    return def.numeric(0);
  }
  double x = std::clamp(u, 0.0, 1.0) * static_cast<double>(n - 1);
  auto k = std::min(static_cast<std::size_t>(std::floor(x)), n - 2);
  double lo = def.numeric(k), hi = def.numeric(k + 1);
  if (slope) *slope = (hi - lo) * static_cast<double>(n - 1);
  return lo + (hi - lo) * (x - static_cast<double>(k));
}

}  // namespace aspo
