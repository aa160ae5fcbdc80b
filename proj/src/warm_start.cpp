#include "aspo/warm_start.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "aspo/error.hpp"

namespace aspo {

namespace {

bool isPrime(std::size_t n) {
  if (n < 2) return false;
  for (std::size_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

constexpr std::size_t kMaxRejectionDraws = 100000;

}  // namespace

bool isStrength2Balanced(const OrthogonalArray& oa) {
  const std::size_t F = oa.factorCount(), N = oa.runCount();
  for (std::size_t a = 0; a < F; ++a) {
    for (std::size_t b = a + 1; b < F; ++b) {
      std::size_t cells = oa.levels[a] * oa.levels[b];
      if (N % cells != 0) return false;
      std::vector<std::size_t> counts(cells, 0);
      for (const auto& row : oa.rows) ++counts[row[a] * oa.levels[b] + row[b]];
      for (auto c : counts)
        if (c != N / cells) return false;
    }
  }
  return true;
}

OrthogonalArray generateOA(const std::vector<std::size_t>& levelCounts, std::uint64_t seed) {
  if (levelCounts.empty()) throw Error(ErrorKind::InvalidArgument, "orthogonal array needs at least one factor");
  for (auto l : levelCounts)
    if (l == 0) throw Error(ErrorKind::InvalidArgument, "factor with zero levels");

  OrthogonalArray oa;
  oa.levels = levelCounts;
  const std::size_t F = levelCounts.size();
  std::mt19937_64 rng(seed);

  if (F == 1) {
    for (std::size_t l = 0; l < levelCounts[0]; ++l) oa.rows.push_back({l});
    oa.exact = true;
    return oa;
  }

  std::size_t maxLevel = *std::max_element(levelCounts.begin(), levelCounts.end());
  std::size_t s = std::max<std::size_t>(maxLevel, 2);
  while (!isPrime(s) || F > s + 1) ++s;

  // Bose construction: row (i, j); column 0 is i, column k+1 is (k*i + j) mod s.
  std::vector<std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) {
      std::vector<std::size_t> row(F);
      row[0] = i;
      for (std::size_t c = 1; c < F; ++c) row[c] = ((c - 1) * i + j) % s;
      rows.push_back(std::move(row));
    }

  // Per-column symbol relabeling and level collapsing, then a row shuffle.
  for (std::size_t c = 0; c < F; ++c) {
    std::vector<std::size_t> map(s);
    for (std::size_t sym = 0; sym < s; ++sym) map[sym] = sym % levelCounts[c];
    std::shuffle(map.begin(), map.end(), rng);
    for (auto& row : rows) row[c] = map[row[c]];
  }
  std::shuffle(rows.begin(), rows.end(), rng);

  oa.rows = std::move(rows);
  oa.exact = isStrength2Balanced(oa);
  return oa;
}

Configuration randomConfiguration(const ParameterSpace& space, std::mt19937_64& rng) {
  std::vector<std::size_t> levels(space.paramCount());
  for (std::size_t i = 0; i < space.paramCount(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, space.param(i).levelCount() - 1);
    levels[i] = pick(rng);
  }
  return Configuration(std::move(levels));
}

std::vector<Configuration> warmStartConfigs(const ParameterSpace& space, const ConstraintTree& tree,
                                            std::uint64_t seed, std::size_t budget) {
  if (budget == 0) throw Error(ErrorKind::InvalidArgument, "warm-start budget must be at least 1");
  std::vector<std::size_t> levels;
  for (const auto& p : space.params()) levels.push_back(p.levelCount());
  OrthogonalArray oa = generateOA(levels, seed);

  std::vector<Configuration> out;
  std::set<Configuration> seen;
  for (const auto& row : oa.rows) {
    Configuration cfg(row);
    if (!seen.insert(cfg).second) continue;
    if (exactTree(tree, space, cfg)) out.push_back(std::move(cfg));
    if (out.size() == budget) return out;
  }

  std::mt19937_64 rng(seed ^ 0x5bd1e995ull);
  for (std::size_t draw = 0; draw < kMaxRejectionDraws && out.size() < budget; ++draw) {
    Configuration cfg = randomConfiguration(space, rng);
    if (!seen.insert(cfg).second) continue;
    if (exactTree(tree, space, cfg)) out.push_back(std::move(cfg));
  }
  if (out.empty())
    throw Error(ErrorKind::InfeasibleSpace, "no feasible configuration found by orthogonal array or " +
                                                std::to_string(kMaxRejectionDraws) + " random draws");
  return out;
}

}  // namespace aspo
