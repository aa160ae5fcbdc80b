#pragma once

#include <random>
#include <string>
#include <vector>

#include "aspo/assets.hpp"

namespace aspo::test {

inline const Assets& assets() {
  static const Assets a = loadAssets(ASPO_ASSET_DIR);
  return a;
}

inline const Problem& boom() { return assets().processor("boom"); }

inline ParameterDef ordinal(std::string name, std::vector<std::int64_t> values, std::int64_t def) {
  ParameterDef d;
  d.name = std::move(name);
  d.kind = ParamKind::Ordinal;
  for (auto v : values) d.values.emplace_back(v);
  d.defaultValue = def;
  return d;
}

inline ParameterDef categorical(std::string name, std::vector<std::string> values, std::string def) {
  ParameterDef d;
  d.name = std::move(name);
  d.kind = ParamKind::Categorical;
  for (auto& v : values) d.values.emplace_back(v);
  d.defaultValue = std::move(def);
  return d;
}

inline Eigen::VectorXd uniformPoint(std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace aspo::test
