#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "aspo/constraints.hpp"
#include "aspo/param_space.hpp"

namespace aspo {

struct OrthogonalArray {
  std::vector<std::vector<std::size_t>> rows;
  std::vector<std::size_t> levels;
  int strength = 2;
  /// True when every column pair is exactly level-balanced.
  bool exact = false;

  std::size_t runCount() const { return rows.size(); }
  std::size_t factorCount() const { return levels.size(); }
};

/// True when every ordered level pair of every column pair occurs
/// N/(levels[i]*levels[j]) times.
bool isStrength2Balanced(const OrthogonalArray& oa);

/// Bose OA(s^2, F, s, 2) when every factor shares a prime level count s and
/// F <= s+1; otherwise a near-orthogonal array collapsed from the smallest
/// covering prime Bose array. Rows and symbols are permuted with the seed,
/// which preserves balance.
OrthogonalArray generateOA(const std::vector<std::size_t>& levelCounts, std::uint64_t seed);

/// Uniform draw of one configuration.
Configuration randomConfiguration(const ParameterSpace& space, std::mt19937_64& rng);

/// Maps OA rows onto configurations, drops rows that fail the tree, tops up
/// with seeded rejection sampling and returns at most `budget` distinct
/// configurations in array order. Throws InfeasibleSpace when nothing feasible
/// turns up within 1e5 draws.
std::vector<Configuration> warmStartConfigs(const ParameterSpace& space, const ConstraintTree& tree,
                                            std::uint64_t seed, std::size_t budget);

}  // namespace aspo
