#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aspo/param_space.hpp"

namespace aspo {

/// ka*x_a - kb*x_b + t >= 0. Strict inequalities arrive here with t already
/// lowered by the smallest positive gap between admissible operand values.
struct InequalityConstraint {
  double ka = 1.0;
  std::size_t xa = 0;
  double kb = 1.0;
  std::size_t xb = 0;
  double t = 0.0;
};

struct IntervalAtom {
  std::size_t param = 0;
  double a = 0.0;
  double b = 0.0;
};

/// If the condition parameter lies in its interval, the consequence parameter
/// must lie in its own. `outsideMargin` is the smallest value of
/// (v-a)(v-b) over admissible condition values outside the interval, so the
/// relaxed "condition is false" branch is strictly positive only off-interval.
struct ConditionalConstraint {
  IntervalAtom condition;
  IntervalAtom consequence;
  double outsideMargin = 1.0;
};

/// x_b divides x_a.
struct DivisibilityConstraint {
  std::size_t xa = 0;
  std::size_t xb = 0;
};

struct ConstraintNode;

struct Conjunction {
  std::vector<ConstraintNode> children;
};

struct Disjunction {
  std::vector<ConstraintNode> children;
};

struct ConstraintNode {
  std::variant<Conjunction, Disjunction, InequalityConstraint, ConditionalConstraint, DivisibilityConstraint>
      node;
};

/// Hierarchical all/any structure of constraint leaves. The root is always a
/// conjunction; an empty root means "no constraints" and is always satisfied.
struct ConstraintTree {
  Conjunction root;
  std::size_t paramCount = 0;

  bool empty() const { return root.children.empty(); }
  std::size_t leafCount() const;
};

ConstraintTree parseConstraints(std::string_view text, const ParameterSpace& space);
ConstraintTree parseConstraintsFile(const std::filesystem::path& path, const ParameterSpace& space);
/// A tree with no constraints.
ConstraintTree unconstrained(const ParameterSpace& space);

double smoothInequality(const InequalityConstraint& c, std::span<const double> values);
/// -(v-a)(v-b): non-negative exactly on [a,b].
double smoothIntervalAtom(const IntervalAtom& atom, double v);
/// -sin^2(pi*x_a/x_b), evaluated on the fractional part of the ratio so that
/// exact multiples give exactly zero. Throws Domain when x_b == 0.
double divisibilityValue(double xa, double xb);
double smoothConditional(const ConditionalConstraint& c, std::span<const double> values);

/// Relaxed value of the whole tree: min over conjunctions, max over
/// disjunctions. Non-negative at an admissible configuration exactly when
/// exactTree holds. Returns +inf for an empty tree.
double smoothTree(const ConstraintTree& tree, std::span<const double> values);
/// Subgradient with respect to the numeric parameter values, one entry per
/// space parameter (zero for parameters the tree does not touch).
std::vector<double> smoothGradient(const ConstraintTree& tree, std::span<const double> values);
/// Value and gradient in one pass.
double smoothTreeWithGradient(const ConstraintTree& tree, std::span<const double> values,
                              std::span<double> grad);

bool exactTree(const ConstraintTree& tree, std::span<const double> values);
bool exactTree(const ConstraintTree& tree, const ParameterSpace& space, const Configuration& cfg);

}  // namespace aspo
