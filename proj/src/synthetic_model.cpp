#include <algorithm>
#include <cmath>
#include <fstream>

#include "aspo/error.hpp"
#include "aspo/eval_harness.hpp"

namespace aspo {

using nlohmann::json;

namespace {

double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw Error(ErrorKind::InvalidConfiguration, std::string("model field '") + key + "' must be a number");
  return j[key].get<double>();
}

// Scalar for ordinals; for categoricals either a scalar (applied to every
// level) or an object keyed by level label.
std::vector<double> coefficientList(const json& pj, const char* key, const ParameterDef& def) {
  if (def.kind == ParamKind::Ordinal) {
    if (!pj.contains(key)) return {0.0};
    if (!pj[key].is_number())
      throw Error(ErrorKind::InvalidConfiguration, def.name + "." + key + " must be a number for an ordinal parameter");
    return {pj[key].get<double>()};
  }
  std::vector<double> out(def.levelCount(), 0.0);
  if (!pj.contains(key)) return out;
  const json& v = pj[key];
  if (v.is_number()) {
    std::fill(out.begin(), out.end(), v.get<double>());
    return out;
  }
  if (!v.is_object()) throw Error(ErrorKind::InvalidConfiguration, def.name + "." + key + " must be a number or an object");
  for (auto it = v.begin(); it != v.end(); ++it) {
    auto level = def.levelOf(ParamValue{it.key()});
    if (!level) throw Error(ErrorKind::InvalidConfiguration, def.name + "." + key + ": unknown value '" + it.key() + "'");
    if (!it.value().is_number()) throw Error(ErrorKind::InvalidConfiguration, def.name + "." + key + " entries must be numbers");
    out[*level] = it.value().get<double>();
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

SyntheticModel SyntheticModel::fromJson(const json& j, const ParameterSpace& space) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfiguration, "model file must be a JSON object");
  SyntheticModel m;
  m.space_ = space;
  try {
    m.processor_ = j.value("processor", std::string("unnamed"));
    m.version_ = j.value("version", 1);
    if (!j.contains("base_cycles") || !j["base_cycles"].is_object() || j["base_cycles"].empty())
      throw Error(ErrorKind::InvalidConfiguration, "model needs a non-empty 'base_cycles' object");
    for (auto it = j["base_cycles"].begin(); it != j["base_cycles"].end(); ++it) {
      auto b = it.value().get<std::int64_t>();
      if (b <= 0) throw Error(ErrorKind::InvalidConfiguration, "base cycles must be positive");
      m.baseCycles_[it.key()] = b;
    }
    m.fmaxBase_ = number(j, "fmax_mhz", m.fmaxBase_);
    m.gamma_ = number(j, "fmax_gamma", m.gamma_);
    m.fmaxNoise_ = number(j, "fmax_noise", m.fmaxNoise_);
    m.lutBase_ = number(j, "lut_base", m.lutBase_);
    m.powerBase_ = number(j, "power_base_w", m.powerBase_);
    m.powerPerKlut_ = number(j, "power_w_per_klut", m.powerPerKlut_);
    m.tFull_ = number(j, "t_full_minutes", m.tFull_);
    m.tBase_ = number(j, "t_base_minutes", m.tBase_);
    m.rho_ = number(j, "rho", m.rho_);
    m.simRate_ = number(j, "sim_minutes_per_megacycle", m.simRate_);
    m.failureMinutes_ = number(j, "failure_minutes", m.failureMinutes_);
    m.cacheHitMinutes_ = number(j, "cache_hit_minutes", m.cacheHitMinutes_);
    m.budget_.maxLuts = j.value("max_luts", m.budget_.maxLuts);

    if (!(m.fmaxBase_ > 0.0)) throw Error(ErrorKind::InvalidConfiguration, "fmax_mhz must be positive");
    if (!(m.gamma_ >= 0.0 && m.gamma_ < 1.0)) throw Error(ErrorKind::InvalidConfiguration, "fmax_gamma must lie in [0,1)");
    if (!(m.fmaxNoise_ >= 0.0 && m.fmaxNoise_ < 0.5)) throw Error(ErrorKind::InvalidConfiguration, "fmax_noise must lie in [0,0.5)");
    if (!(m.tBase_ > 0.0 && m.tBase_ <= m.tFull_))
      throw Error(ErrorKind::InvalidConfiguration, "need 0 < t_base_minutes <= t_full_minutes");
    if (!(m.rho_ > 0.0)) throw Error(ErrorKind::InvalidConfiguration, "rho must be positive");
    if (!(m.simRate_ >= 0.0) || !(m.failureMinutes_ > 0.0) || !(m.cacheHitMinutes_ > 0.0))
      throw Error(ErrorKind::InvalidConfiguration, "time constants must be positive");
    if (m.budget_.maxLuts <= 0) throw Error(ErrorKind::InvalidConfiguration, "max_luts must be positive");

    json params = j.value("parameters", json::object());
    if (!params.is_object()) throw Error(ErrorKind::InvalidConfiguration, "'parameters' must be an object");
    for (auto it = params.begin(); it != params.end(); ++it)
      if (!space.indexOf(it.key()))
        throw Error(ErrorKind::UnknownParameter, "model refers to unknown parameter '" + it.key() + "'");

    m.coeffs_.resize(space.paramCount());
    m.maxComplexity_ = 0.0;
    for (std::size_t i = 0; i < space.paramCount(); ++i) {
      const auto& def = space.param(i);
      json pj = params.value(def.name, json::object());
      auto& c = m.coeffs_[i];
      c.cycle = coefficientList(pj, "cycle", def);
      c.complexity = coefficientList(pj, "complexity", def);
      c.luts = coefficientList(pj, "luts", def);
      c.syncWeight = number(pj, "sync_weight", 1.0);
      if (!(c.syncWeight >= 0.0)) throw Error(ErrorKind::InvalidConfiguration, def.name + ".sync_weight must be non-negative");
      for (double v : c.complexity)
        if (v < 0.0) throw Error(ErrorKind::InvalidConfiguration, def.name + ".complexity must be non-negative");
      m.maxComplexity_ += *std::max_element(c.complexity.begin(), c.complexity.end());
    }
    if (m.maxComplexity_ <= 0.0) m.maxComplexity_ = 1.0;
    double totalSync = 0.0;
    for (const auto& c : m.coeffs_) totalSync += c.syncWeight;
    if (!(totalSync > 0.0)) throw Error(ErrorKind::InvalidConfiguration, "sync weights must not all be zero");

    json sens = j.value("benchmark_sensitivity", json::object());
    for (auto b = sens.begin(); b != sens.end(); ++b) {
      for (auto p = b.value().begin(); p != b.value().end(); ++p) {
        if (!space.indexOf(p.key()))
          throw Error(ErrorKind::UnknownParameter, "sensitivity refers to unknown parameter '" + p.key() + "'");
        m.sensitivity_[b.key()][p.key()] = p.value().get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfiguration, std::string("malformed model file: ") + e.what());
  }
  return m;
}

SyntheticModel SyntheticModel::fromFile(const std::filesystem::path& path, const ParameterSpace& space) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open model file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0, 0);
  }
  return fromJson(j, space);
}

std::int64_t SyntheticModel::baseCyclesFor(const std::string& benchmark) const {
  auto it = baseCycles_.find(benchmark);
  if (it == baseCycles_.end()) throw Error(ErrorKind::UnknownBenchmark, "unknown benchmark '" + benchmark + "'");
  return it->second;
}

double SyntheticModel::sensitivity(const std::string& benchmark, std::size_t param) const {
  auto b = sensitivity_.find(benchmark);
  if (b == sensitivity_.end()) return 1.0;
  auto p = b->second.find(space_.param(param).name);
  return p == b->second.end() ? 1.0 : p->second;
}

DistanceWeights SyntheticModel::syncWeights() const {
  std::vector<double> w;
  for (const auto& c : coeffs_) w.push_back(c.syncWeight);
  return DistanceWeights(w);
}

double SyntheticModel::maxDistance() const {
  double s = 0.0;
  for (const auto& c : coeffs_) s += c.syncWeight;
  return s;
}

std::int64_t SyntheticModel::cycles(const Configuration& cfg, const std::string& benchmark) const {
  space_.check(cfg);
  double b = static_cast<double>(baseCyclesFor(benchmark));
  double penalty = 0.0;
  for (std::size_t i = 0; i < space_.paramCount(); ++i) {
    const auto& def = space_.param(i);
    const auto& c = coeffs_[i];
    double term;
    if (def.kind == ParamKind::Ordinal) {
      double gap = 1.0 - def.rank(cfg.level(i));
      term = c.cycle[0] * gap * gap;
    } else {
      term = c.cycle[cfg.level(i)];
    }
    penalty += term * sensitivity(benchmark, i);
  }
  return static_cast<std::int64_t>(std::llround(b * (1.0 + penalty)));
}

double SyntheticModel::complexity(const Configuration& cfg) const {
  space_.check(cfg);
  double s = 0.0;
  for (std::size_t i = 0; i < space_.paramCount(); ++i) {
    const auto& def = space_.param(i);
    const auto& c = coeffs_[i];
    s += def.kind == ParamKind::Ordinal ? c.complexity[0] * def.rank(cfg.level(i)) : c.complexity[cfg.level(i)];
  }
  return s / maxComplexity_;
}

double SyntheticModel::fmax(const Configuration& cfg, std::uint64_t seed) const {
  double f = fmaxBase_ * (1.0 - gamma_ * complexity(cfg));
  if (fmaxNoise_ > 0.0) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(ConfigurationHash{}(cfg)));
    double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0,1)
    f *= 1.0 + fmaxNoise_ * (2.0 * u - 1.0);
  }
  return f;
}

std::int64_t SyntheticModel::luts(const Configuration& cfg) const {
  space_.check(cfg);
  double s = lutBase_;
  for (std::size_t i = 0; i < space_.paramCount(); ++i) {
    const auto& def = space_.param(i);
    const auto& c = coeffs_[i];
    s += def.kind == ParamKind::Ordinal ? c.luts[0] * def.rank(cfg.level(i)) : c.luts[cfg.level(i)];
  }
  return static_cast<std::int64_t>(std::llround(std::max(s, 0.0)));
}

double SyntheticModel::power(std::int64_t luts) const {
  return powerBase_ + powerPerKlut_ * static_cast<double>(luts) / 1000.0;
}

double SyntheticModel::simulationMinutes(std::int64_t cycles) const {
  return simRate_ * static_cast<double>(cycles) / 1e6;
}

double SyntheticModel::synthesisTime(const Configuration& cfg, const Configuration* reference) const {
  if (!reference) return tFull_;
  double d = weightedDistance(space_, cfg, *reference, syncWeights());
  double t = tBase_ + tFull_ * rho_ * d / maxDistance();
  return std::clamp(t, tBase_, tFull_);
}

}  // namespace aspo
