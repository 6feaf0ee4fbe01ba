#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "msym/rational.hpp"
#include "msym/symbol.hpp"

namespace msym {

/// Node kinds in canonical order. Mixed-kind comparisons in the normal form
/// sort by this order first.
enum class NodeKind : std::uint8_t { constant, symbol, add, mul, pow, function };

enum class Func : std::uint8_t { sin, cos, tan, exp, log };

const char* func_name(Func f);

struct Node;

/// Immutable symbolic scalar expression, always held in normal form.
///
/// Every constructor routes through the simplifier: sums and products are
/// flattened, like terms and like bases collected, rational constants folded
/// exactly, and operands ordered by the total order `compare`. Two
/// expressions that normalize to the same tree compare equal structurally.
/// Square roots are powers with exponent 1/2, quotients are powers with
/// negative exponents, negation is multiplication by -1.
///
/// Copies share the underlying tree; an Expression is safe to share across
/// threads.
class Expression {
 public:
  Expression();  // zero
  Expression(Rational value);  // NOLINT implicit
  Expression(int value) : Expression(Rational(value)) {}  // NOLINT implicit
  Expression(std::int64_t value) : Expression(Rational(value)) {}  // NOLINT implicit
  Expression(Symbol s);  // NOLINT implicit

  NodeKind kind() const;
  bool is_constant() const { return kind() == NodeKind::constant; }
  bool is_zero() const;
  bool is_one() const;

  /// Value of a constant node.
  const Rational& value() const;
  /// Exponent of a power node.
  const Rational& exponent() const;
  const Symbol& symbol() const;
  Func func() const;
  /// Terms of a sum, factors of a product, {base} of a power, {argument} of a function.
  std::span<const Expression> args() const;

  /// Sorted, duplicate-free list of symbols occurring in the tree.
  const std::vector<Symbol>& free_symbols() const;
  bool depends_on(const Symbol& s) const;
  bool depends_on_kind(SymbolKind k) const;

  std::size_t hash() const;
  /// Number of nodes in the tree (shared subtrees counted once per use).
  std::size_t size() const;

  /// Prints in the input grammar; parse(to_string()) reproduces the tree.
  std::string to_string() const;

  friend bool operator==(const Expression& a, const Expression& b);

  // Internal: wrap an already-normalized node.
  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  const Node& node() const { return *node_; }

 private:
  std::shared_ptr<const Node> node_;
};

/// Total order on normal forms: node kind, then payload (value, symbol,
/// function), then children lexicographically. Returns <0, 0, >0.
int compare(const Expression& a, const Expression& b);

struct ExpressionLess {
  bool operator()(const Expression& a, const Expression& b) const { return compare(a, b) < 0; }
};

Expression add(std::vector<Expression> terms);
Expression mul(std::vector<Expression> factors);
Expression pow(const Expression& base, const Rational& exponent);
Expression sqrt(const Expression& e);
Expression apply(Func f, const Expression& arg);

Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);

/// Partial derivative with every coordinate treated as independent.
Expression differentiate(const Expression& e, const Symbol& s);

/// Simultaneous substitution of symbols by expressions.
Expression substitute(const Expression& e, const std::map<Symbol, Expression>& values);

/// Replaces every occurrence of the subtree `target` (structural match).
Expression replace(const Expression& e, const Expression& target, const Expression& replacement);

/// Distributes products over sums and multiplies out small positive
/// integer powers of sums. Gives up (returning the partially expanded
/// product) once a single product would exceed `max_terms` terms.
Expression expand(const Expression& e, std::size_t max_terms = 20000);

/// Coefficient and remainder of a term: `3*x*y` -> (3, x*y), `5` -> (5, 1).
std::pair<Rational, Expression> split_coefficient(const Expression& term);

using Assignment = std::map<Symbol, double>;

/// IEEE double evaluation. Throws DomainError naming the offending
/// subexpression, SymbolError when a symbol is unassigned.
double evaluate(const Expression& e, const Assignment& values);

/// Scalar kernels shared by the tree evaluator and CompiledExpression.
namespace detail {
double pow_rational(double base, const Rational& exponent, const Expression& context);
double apply_func(Func f, double x, const Expression& context);
}  // namespace detail

enum class Equality { identical, numerically_equal, different };

struct EquivalenceOptions {
  int samples = 50;
  double relative_tolerance = 1e-10;
  double lo = -0.5;
  double hi = 0.5;
  std::uint64_t seed = 20091106;
};

/// Identical normal form (also after expansion), otherwise agreement at
/// `samples` random points where both sides evaluate.
Equality equivalent(const Expression& a, const Expression& b, const EquivalenceOptions& options = {});

const char* to_string(Equality e);

/// Flat stack program for fast repeated evaluation over a fixed slot layout.
class CompiledExpression {
 public:
  CompiledExpression() = default;
  /// Throws SymbolError if `e` uses a symbol not present in `slots`.
  CompiledExpression(const Expression& e, std::span<const Symbol> slots);

  double operator()(std::span<const double> values) const;

 private:
  enum class Code : std::uint8_t { constant, load, add, mul, pow, func };
  struct Op {
    Code code = Code::constant;
    Func f = Func::sin;
    std::uint32_t n = 0;  // slot index, operand count, or source index
    double c = 0.0;
    Rational e;
  };
  std::vector<Op> ops_;
  std::vector<Expression> sources_;
  std::size_t depth_ = 0;
};

}  // namespace msym

template <>
struct std::hash<msym::Expression> {
  std::size_t operator()(const msym::Expression& e) const noexcept { return e.hash(); }
};
