#include "aspo/constraints.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "aspo/error.hpp"

namespace aspo {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t countLeaves(const ConstraintNode& n) {
  if (const auto* c = std::get_if<Conjunction>(&n.node)) {
    std::size_t k = 0;
    for (const auto& ch : c->children) k += countLeaves(ch);
    return k;
  }
  if (const auto* d = std::get_if<Disjunction>(&n.node)) {
    std::size_t k = 0;
    for (const auto& ch : d->children) k += countLeaves(ch);
    return k;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Parsing

class TreeParser {
 public:
  explicit TreeParser(const ParameterSpace& space) : space_(space) {}

  ConstraintTree parseRoot(const json& j) {
    if (!j.is_object() || !j.contains("all") || j.size() != 1)
      fail("", "root must be an object with a single 'all' array");
    ConstraintTree tree;
    tree.paramCount = space_.paramCount();
    tree.root = Conjunction{parseChildren(j["all"], "/all", true)};
    return tree;
  }

 private:
  [[noreturn]] void fail(const std::string& path, const std::string& why) const {
    throw ParseError("constraint file " + (path.empty() ? std::string("/") : path) + ": " + why, 0, 0);
  }

  std::vector<ConstraintNode> parseChildren(const json& arr, const std::string& path, bool allowEmpty) {
    if (!arr.is_array()) fail(path, "expected an array");
    if (arr.empty() && !allowEmpty) fail(path, "empty child list");
    std::vector<ConstraintNode> out;
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(parseNode(arr[i], path + "/" + std::to_string(i)));
    return out;
  }

  ConstraintNode parseNode(const json& j, const std::string& path) {
    if (!j.is_object() || j.size() != 1) fail(path, "each node must be an object with exactly one key");
    auto first = j.begin();
    const std::string key = first.key();
    const json& body = first.value();
    std::string sub = path + "/" + key;
    if (key == "all") return {Conjunction{parseChildren(body, sub, false)}};
    if (key == "any") return {Disjunction{parseChildren(body, sub, false)}};
    if (key == "ineq") return {parseIneq(body, sub)};
    if (key == "cond") return {parseCond(body, sub)};
    if (key == "div") {
      if (!body.is_object()) fail(sub, "expected an object");
      return {DivisibilityConstraint{numericParam(body, "xa", sub), numericParam(body, "xb", sub)}};
    }
    if (key == "expr") {
      if (!body.is_string()) fail(sub, "expected a string");
      return parseExpr(body.get<std::string>(), sub);
    }
    fail(path, "unknown node type '" + key + "'");
  }

  std::size_t resolve(const std::string& name, const std::string& path) const {
    auto idx = space_.indexOf(name);
    if (!idx) throw Error(ErrorKind::UnknownParameter, "constraint file " + path + ": unknown parameter '" + name + "'");
    if (space_.param(*idx).kind != ParamKind::Ordinal)
      throw Error(ErrorKind::TypeMismatch,
                  "constraint file " + path + ": categorical parameter '" + name + "' used in a numeric constraint");
    return *idx;
  }

  std::size_t numericParam(const json& body, const char* field, const std::string& path) const {
    if (!body.contains(field) || !body[field].is_string()) fail(path, std::string("missing string field '") + field + "'");
    return resolve(body[field].get<std::string>(), path + "/" + field);
  }

  double number(const json& body, const char* field, const std::string& path, std::optional<double> dflt) const {
    if (!body.contains(field)) {
      if (dflt) return *dflt;
      fail(path, std::string("missing numeric field '") + field + "'");
    }
    if (!body[field].is_number()) fail(path + "/" + field, "expected a number");
    return body[field].get<double>();
  }

  // Smallest positive value of ka*va - kb*vb + t over admissible pairs.
  double strictGap(const InequalityConstraint& c) const {
    const auto& pa = space_.param(c.xa);
    const auto& pb = space_.param(c.xb);
    double gap = kInf;
    for (std::size_t i = 0; i < pa.levelCount(); ++i)
      for (std::size_t k = 0; k < pb.levelCount(); ++k) {
        double v = c.ka * pa.numeric(i) - c.kb * pb.numeric(k) + c.t;
        if (v > 0.0) gap = std::min(gap, v);
      }
    return std::isfinite(gap) ? gap : 1.0;
  }

  InequalityConstraint parseIneq(const json& body, const std::string& path) {
    if (!body.is_object()) fail(path, "expected an object");
    InequalityConstraint c;
    c.ka = number(body, "ka", path, 1.0);
    c.kb = number(body, "kb", path, 1.0);
    c.t = number(body, "t", path, 0.0);
    c.xa = numericParam(body, "xa", path);
    c.xb = numericParam(body, "xb", path);
    if (body.value("strict", false)) c.t -= strictGap(c);
    return c;
  }

  IntervalAtom parseAtom(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    IntervalAtom atom;
    atom.param = numericParam(j, "param", path);
    if (!j.contains("in") || !j["in"].is_array() || j["in"].size() != 2 || !j["in"][0].is_number() ||
        !j["in"][1].is_number())
      fail(path + "/in", "expected [a, b]");
    atom.a = j["in"][0].get<double>();
    atom.b = j["in"][1].get<double>();
    if (atom.a > atom.b) fail(path + "/in", "interval lower bound exceeds upper bound");
    return atom;
  }

  ConditionalConstraint parseCond(const json& body, const std::string& path) {
    if (!body.is_object() || !body.contains("if") || !body.contains("then"))
      fail(path, "expected an object with 'if' and 'then'");
    ConditionalConstraint c;
    c.condition = parseAtom(body["if"], path + "/if");
    c.consequence = parseAtom(body["then"], path + "/then");
    const auto& p = space_.param(c.condition.param);
    double margin = kInf;
    for (std::size_t i = 0; i < p.levelCount(); ++i) {
      double outside = -smoothIntervalAtom(c.condition, p.numeric(i));
      if (outside > 0.0) margin = std::min(margin, outside);
    }
    c.outsideMargin = std::isfinite(margin) ? margin : 1.0;
    return c;
  }

  // expr := term CMP term | NAME DIV NAME ;  term := [NUM '*'] NAME {('+'|'-') NUM}
  ConstraintNode parseExpr(const std::string& s, const std::string& path) {
    pos_ = 0;
    text_ = &s;
    path_ = &path;
    auto lhs = term();
    skipSpace();
    std::string op = oper();
    if (op == "%|" || op == "|") {
      if (lhs.coef != 1.0 || lhs.offset != 0.0) exprFail("divisibility operands must be bare parameter names");
      auto rhs = term();
      if (rhs.coef != 1.0 || rhs.offset != 0.0) exprFail("divisibility operands must be bare parameter names");
      end();
      return {DivisibilityConstraint{lhs.param, rhs.param}};
    }
    auto rhs = term();
    end();
    bool flip = op == "<=" || op == "<";
    bool strict = op == ">" || op == "<";
    const Term& big = flip ? rhs : lhs;
    const Term& small = flip ? lhs : rhs;
    InequalityConstraint c{big.coef, big.param, small.coef, small.param, big.offset - small.offset};
    if (strict) c.t -= strictGap(c);
    return {c};
  }

  struct Term {
    double coef = 1.0;
    std::size_t param = 0;
    double offset = 0.0;
  };

  [[noreturn]] void exprFail(const std::string& why) const {
    throw ParseError("constraint file " + *path_ + ": column " + std::to_string(pos_ + 1) + " of expression '" +
                         *text_ + "': " + why,
                     1, pos_ + 1);
  }

  void skipSpace() {
    while (pos_ < text_->size() && std::isspace(static_cast<unsigned char>((*text_)[pos_]))) ++pos_;
  }

  std::optional<double> numberToken() {
    skipSpace();
    std::size_t start = pos_;
    while (pos_ < text_->size() &&
           (std::isdigit(static_cast<unsigned char>((*text_)[pos_])) || (*text_)[pos_] == '.'))
      ++pos_;
    if (start == pos_) return std::nullopt;
    try {
      return std::stod(text_->substr(start, pos_ - start));
    } catch (...) {
      pos_ = start;
      exprFail("malformed number");
    }
  }

  std::string nameToken() {
    skipSpace();
    std::size_t start = pos_;
    while (pos_ < text_->size() &&
           (std::isalnum(static_cast<unsigned char>((*text_)[pos_])) || (*text_)[pos_] == '_'))
      ++pos_;
    if (start == pos_) exprFail("expected a parameter name");
    return text_->substr(start, pos_ - start);
  }

  Term term() {
    Term t;
    skipSpace();
    if (auto n = numberToken()) {
      skipSpace();
      if (pos_ >= text_->size() || (*text_)[pos_] != '*') exprFail("expected '*' after coefficient");
      ++pos_;
      t.coef = *n;
    }
    std::size_t at = pos_;
    std::string name = nameToken();
    try {
      t.param = resolve(name, *path_);
    } catch (const Error& e) {
      pos_ = at;
      throw;
    }
    for (;;) {
      skipSpace();
      if (pos_ >= text_->size() || ((*text_)[pos_] != '+' && (*text_)[pos_] != '-')) break;
      double sign = (*text_)[pos_] == '-' ? -1.0 : 1.0;
      ++pos_;
      auto n = numberToken();
      if (!n) exprFail("expected a number");
      t.offset += sign * *n;
    }
    return t;
  }

  std::string oper() {
    static const char* ops[] = {">=", "<=", "%|", ">", "<", "|"};
    for (const char* op : ops) {
      std::string_view o(op);
      if (text_->compare(pos_, o.size(), o) == 0) {
        pos_ += o.size();
        return std::string(o);
      }
    }
    exprFail("expected one of >=, >, <=, <, %|");
  }

  void end() {
    skipSpace();
    if (pos_ != text_->size()) exprFail("unexpected trailing input");
  }

  const ParameterSpace& space_;
  const std::string* text_ = nullptr;
  const std::string* path_ = nullptr;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation

double leafValue(const ConstraintNode& n, std::span<const double> v, std::span<double> grad);

double nodeValue(const ConstraintNode& n, std::span<const double> v, std::span<double> grad) {
  bool wantGrad = !grad.empty();
  auto combine = [&](const std::vector<ConstraintNode>& children, bool takeMin) {
    double best = 0.0;
    std::vector<double> bestGrad, scratch;
    bool first = true;
    for (const auto& ch : children) {
      if (wantGrad) scratch.assign(grad.size(), 0.0);
      double val = nodeValue(ch, v, wantGrad ? std::span<double>(scratch) : std::span<double>());
      // Strict comparison keeps the lowest-index child on ties.
      if (first || (takeMin ? val < best : val > best)) {
        best = val;
        if (wantGrad) bestGrad = scratch;
        first = false;
      }
    }
    if (wantGrad)
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += bestGrad[i];
    return best;
  };
  if (const auto* c = std::get_if<Conjunction>(&n.node)) return combine(c->children, true);
  if (const auto* d = std::get_if<Disjunction>(&n.node)) return combine(d->children, false);
  return leafValue(n, v, grad);
}

double atomDerivative(const IntervalAtom& atom, double x) { return -(2.0 * x - atom.a - atom.b); }

double leafValue(const ConstraintNode& n, std::span<const double> v, std::span<double> grad) {
  bool wantGrad = !grad.empty();
  if (const auto* c = std::get_if<InequalityConstraint>(&n.node)) {
    if (wantGrad) {
      grad[c->xa] += c->ka;
      grad[c->xb] -= c->kb;
    }
    return smoothInequality(*c, v);
  }
  if (const auto* c = std::get_if<ConditionalConstraint>(&n.node)) {
    double x1 = v[c->condition.param], x2 = v[c->consequence.param];
    double c1 = smoothIntervalAtom(c->condition, x1);
    double c2 = smoothIntervalAtom(c->consequence, x2);
    double notCond = -c1 - c->outsideMargin;
    // Index order for ties: the "condition false" branch first, then the
    // conjunction with c1 before c2.
    double both = std::min(c1, c2);
    if (notCond >= both) {
      if (wantGrad) grad[c->condition.param] -= atomDerivative(c->condition, x1);
      return notCond;
    }
    if (wantGrad) {
      if (c1 <= c2) grad[c->condition.param] += atomDerivative(c->condition, x1);
      else grad[c->consequence.param] += atomDerivative(c->consequence, x2);
    }
    return both;
  }
  const auto& d = std::get<DivisibilityConstraint>(n.node);
  double xa = v[d.xa], xb = v[d.xb];
  double val = divisibilityValue(xa, xb);
  if (wantGrad) {
    double r = xa / xb;
    double s2 = std::sin(2.0 * std::numbers::pi * (r - std::round(r)));
    grad[d.xa] += -std::numbers::pi * s2 / xb;
    grad[d.xb] += std::numbers::pi * s2 * xa / (xb * xb);
  }
  return val;
}

bool exactNode(const ConstraintNode& n, std::span<const double> v) {
  if (const auto* c = std::get_if<Conjunction>(&n.node))
    return std::all_of(c->children.begin(), c->children.end(), [&](const auto& ch) { return exactNode(ch, v); });
  if (const auto* d = std::get_if<Disjunction>(&n.node))
    return std::any_of(d->children.begin(), d->children.end(), [&](const auto& ch) { return exactNode(ch, v); });
  if (const auto* c = std::get_if<InequalityConstraint>(&n.node))
    return c->ka * v[c->xa] - c->kb * v[c->xb] + c->t >= 0.0;
  if (const auto* c = std::get_if<ConditionalConstraint>(&n.node)) {
    auto inside = [&](const IntervalAtom& a) { return v[a.param] >= a.a && v[a.param] <= a.b; };
    return !inside(c->condition) || inside(c->consequence);
  }
  const auto& d = std::get<DivisibilityConstraint>(n.node);
  auto xa = static_cast<long long>(std::llround(v[d.xa]));
  auto xb = static_cast<long long>(std::llround(v[d.xb]));
  if (xb == 0) throw Error(ErrorKind::Domain, "divisibility constraint with zero divisor");
  return xa % xb == 0;
}

void checkValues(const ConstraintTree& tree, std::span<const double> values) {
  if (values.size() != tree.paramCount)
    throw Error(ErrorKind::DimensionMismatch, "constraint evaluation expects " + std::to_string(tree.paramCount) +
                                                  " values, got " + std::to_string(values.size()));
}

}  // namespace

std::size_t ConstraintTree::leafCount() const {
  std::size_t k = 0;
  for (const auto& ch : root.children) k += countLeaves(ch);
  return k;
}

ConstraintTree parseConstraints(std::string_view text, const ParameterSpace& space) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is the 1-based offset of the offending character.
    std::size_t line = 1, col = 1;
    std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("constraint syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                         ": " + e.what(),
                     line, col);
  }
  return TreeParser(space).parseRoot(j);
}

ConstraintTree parseConstraintsFile(const std::filesystem::path& path, const ParameterSpace& space) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open constraint file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parseConstraints(ss.str(), space);
}

ConstraintTree unconstrained(const ParameterSpace& space) {
  ConstraintTree t;
  t.paramCount = space.paramCount();
  return t;
}

double smoothInequality(const InequalityConstraint& c, std::span<const double> values) {
  return c.ka * values[c.xa] - c.kb * values[c.xb] + c.t;
}

double smoothIntervalAtom(const IntervalAtom& atom, double v) { return -(v - atom.a) * (v - atom.b); }

double divisibilityValue(double xa, double xb) {
  if (xb == 0.0) throw Error(ErrorKind::Domain, "divisibility constraint with zero divisor");
  double r = xa / xb;
  double s = std::sin(std::numbers::pi * (r - std::round(r)));
  return -s * s;
}

double smoothConditional(const ConditionalConstraint& c, std::span<const double> values) {
  ConstraintNode n{c};
  return leafValue(n, values, {});
}

double smoothTree(const ConstraintTree& tree, std::span<const double> values) {
  checkValues(tree, values);
  double best = kInf;
  for (const auto& ch : tree.root.children) best = std::min(best, nodeValue(ch, values, {}));
  return best;
}

double smoothTreeWithGradient(const ConstraintTree& tree, std::span<const double> values, std::span<double> grad) {
  checkValues(tree, values);
  if (grad.size() != tree.paramCount) throw Error(ErrorKind::DimensionMismatch, "gradient buffer size mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);
  if (tree.empty()) return kInf;
  // Evaluate children in place to avoid copying the tree.
  double best = 0.0;
  std::vector<double> scratch(grad.size());
  bool first = true;
  for (const auto& ch : tree.root.children) {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    double val = nodeValue(ch, values, scratch);
    if (first || val < best) {
      best = val;
      std::copy(scratch.begin(), scratch.end(), grad.begin());
      first = false;
    }
  }
  return best;
}

std::vector<double> smoothGradient(const ConstraintTree& tree, std::span<const double> values) {
  std::vector<double> g(tree.paramCount, 0.0);
  smoothTreeWithGradient(tree, values, g);
  return g;
}

bool exactTree(const ConstraintTree& tree, std::span<const double> values) {
  checkValues(tree, values);
  return std::all_of(tree.root.children.begin(), tree.root.children.end(),
                     [&](const auto& ch) { return exactNode(ch, values); });
}

bool exactTree(const ConstraintTree& tree, const ParameterSpace& space, const Configuration& cfg) {
  auto v = space.numericValues(cfg);
  return exactTree(tree, v);
}

}  // namespace aspo
