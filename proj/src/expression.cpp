#include "msym/expression.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include "msym/errors.hpp"

namespace msym {

struct Node {
  NodeKind kind = NodeKind::constant;
  Func func = Func::sin;
  Symbol sym;
  Rational value;  // constant value or power exponent
  std::vector<Expression> args;
  std::vector<Symbol> free;
  std::size_t hash = 0;
  std::size_t size = 1;
};

namespace {

std::size_t mix(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

std::size_t hash_rational(const Rational& r) {
  return mix(std::hash<std::int64_t>{}(r.num()), std::hash<std::int64_t>{}(r.den()));
}

std::size_t hash_symbol(const Symbol& s) {
  std::size_t h = static_cast<std::size_t>(s.kind);
  h = mix(h, static_cast<std::size_t>(s.field));
  h = mix(h, static_cast<std::size_t>(s.dir));
  return mix(h, static_cast<std::size_t>(s.dir2));
}

Expression make_node(Node n) {
  std::size_t h = mix(0x51ed270b, static_cast<std::size_t>(n.kind));
  switch (n.kind) {
    case NodeKind::constant: h = mix(h, hash_rational(n.value)); break;
    case NodeKind::symbol:
      h = mix(h, hash_symbol(n.sym));
      n.free = {n.sym};
      break;
    case NodeKind::pow: h = mix(h, hash_rational(n.value)); break;
    case NodeKind::function: h = mix(h, static_cast<std::size_t>(n.func)); break;
    default: break;
  }
  if (!n.args.empty()) {
    std::vector<Symbol> merged;
    for (const auto& a : n.args) {
      h = mix(h, a.hash());
      n.size += a.size();
      const auto& f = a.free_symbols();
      if (merged.empty()) {
        merged = f;
      } else if (!f.empty()) {
        std::vector<Symbol> out;
        out.reserve(merged.size() + f.size());
        std::set_union(merged.begin(), merged.end(), f.begin(), f.end(), std::back_inserter(out));
        merged.swap(out);
      }
    }
    n.free = std::move(merged);
  }
  n.hash = h;
  return Expression(std::make_shared<const Node>(std::move(n)));
}

Expression make_constant(const Rational& r) {
  Node n;
  n.kind = NodeKind::constant;
  n.value = r;
  return make_node(std::move(n));
}

const Expression& zero_expr() {
  static const Expression z = make_constant(Rational(0));
  return z;
}

int cmp_rational(const Rational& a, const Rational& b) {
  auto c = a <=> b;
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

// Base and exponent of a product factor: x^e -> (x, e), anything else -> (f, 1).
std::pair<Expression, Rational> split_power(const Expression& f) {
  if (f.kind() == NodeKind::pow) return {f.args()[0], f.exponent()};
  return {f, Rational(1)};
}

bool is_odd(std::int64_t v) { return (v % 2) != 0; }

// Exact q-th root of a non-negative integer, if it exists.
bool exact_root(std::int64_t value, std::int64_t q, std::int64_t& root) {
  if (value < 0) return false;
  if (value == 0 || value == 1) {
    root = value;
    return true;
  }
  auto guess = static_cast<std::int64_t>(std::llround(std::pow(static_cast<double>(value), 1.0 / static_cast<double>(q))));
  for (std::int64_t g = std::max<std::int64_t>(guess - 1, 1); g <= guess + 1; ++g) {
    __int128 acc = 1;
    bool overflow = false;
    for (std::int64_t i = 0; i < q; ++i) {
      acc *= g;
      if (acc > static_cast<__int128>(INT64_MAX)) {
        overflow = true;
        break;
      }
    }
    if (!overflow && acc == value) {
      root = g;
      return true;
    }
  }
  return false;
}

Expression make_pow_node(const Expression& base, const Rational& e) {
  Node n;
  n.kind = NodeKind::pow;
  n.value = e;
  n.args = {base};
  return make_node(std::move(n));
}

// Power of a rational constant: folds exactly when possible, otherwise keeps
// base^(fractional part) with the integer part folded into a coefficient.
Expression constant_pow(const Rational& base, const Rational& e) {
  if (e.is_integer()) {
    if (base.is_zero() && e.is_negative()) return make_pow_node(make_constant(base), e);
    return make_constant(base.pow(e.num()));
  }
  if (base.is_zero()) return e.is_negative() ? make_pow_node(make_constant(base), e) : zero_expr();
  if (base.is_one()) return make_constant(Rational(1));
  const std::int64_t q = e.den();
  if (!base.is_negative() || is_odd(q)) {
    const bool neg = base.is_negative();
    std::int64_t rn = 0;
    std::int64_t rd = 0;
    const std::int64_t an = neg ? -base.num() : base.num();
    if (exact_root(an, q, rn) && exact_root(base.den(), q, rd)) {
      Rational root(neg ? -rn : rn, rd);
      return make_constant(root.pow(e.num()));
    }
  }
  if (base.is_negative()) return make_pow_node(make_constant(base), e);
  // floor division of the exponent so the kept power is in (0, 1)
  std::int64_t whole = e.num() / e.den();
  if (e.num() < 0 && e.num() % e.den() != 0) --whole;
  const Rational frac = e - Rational(whole);
  if (whole == 0) return make_pow_node(make_constant(base), frac);
  return mul({make_constant(base.pow(whole)), make_pow_node(make_constant(base), frac)});
}

}  // namespace

// ---------------------------------------------------------------------------
// Expression accessors

Expression::Expression() : Expression(zero_expr()) {}

Expression::Expression(Rational value) : Expression(make_constant(value)) {}

Expression::Expression(Symbol s) {
  Node n;
  n.kind = NodeKind::symbol;
  n.sym = s;
  *this = make_node(std::move(n));
}

NodeKind Expression::kind() const { return node_->kind; }
bool Expression::is_zero() const { return node_->kind == NodeKind::constant && node_->value.is_zero(); }
bool Expression::is_one() const { return node_->kind == NodeKind::constant && node_->value.is_one(); }
const Rational& Expression::value() const { return node_->value; }
const Rational& Expression::exponent() const { return node_->value; }
const Symbol& Expression::symbol() const { return node_->sym; }
Func Expression::func() const { return node_->func; }
std::span<const Expression> Expression::args() const { return node_->args; }
const std::vector<Symbol>& Expression::free_symbols() const { return node_->free; }
std::size_t Expression::hash() const { return node_->hash; }
std::size_t Expression::size() const { return node_->size; }

bool Expression::depends_on(const Symbol& s) const {
  return std::binary_search(node_->free.begin(), node_->free.end(), s);
}

bool Expression::depends_on_kind(SymbolKind k) const {
  return std::any_of(node_->free.begin(), node_->free.end(), [k](const Symbol& s) { return s.kind == k; });
}

bool operator==(const Expression& a, const Expression& b) {
  if (a.node_ == b.node_) return true;
  if (a.hash() != b.hash()) return false;
  return compare(a, b) == 0;
}

const char* func_name(Func f) {
  switch (f) {
    case Func::sin: return "sin";
    case Func::cos: return "cos";
    case Func::tan: return "tan";
    case Func::exp: return "exp";
    case Func::log: return "log";
  }
  return "?";
}

int compare(const Expression& a, const Expression& b) {
  if (&a.node() == &b.node()) return 0;
  if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
  switch (a.kind()) {
    case NodeKind::constant: return cmp_rational(a.value(), b.value());
    case NodeKind::symbol: {
      auto c = a.symbol() <=> b.symbol();
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case NodeKind::pow: {
      if (int c = compare(a.args()[0], b.args()[0]); c != 0) return c;
      return cmp_rational(a.exponent(), b.exponent());
    }
    case NodeKind::function:
      if (a.func() != b.func()) return a.func() < b.func() ? -1 : 1;
      return compare(a.args()[0], b.args()[0]);
    case NodeKind::add:
    case NodeKind::mul: {
      const auto aa = a.args();
      const auto bb = b.args();
      const std::size_t n = std::min(aa.size(), bb.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (int c = compare(aa[i], bb[i]); c != 0) return c;
      }
      if (aa.size() != bb.size()) return aa.size() < bb.size() ? -1 : 1;
      return 0;
    }
  }
  return 0;
}

std::pair<Rational, Expression> split_coefficient(const Expression& term) {
  if (term.is_constant()) return {term.value(), Expression(Rational(1))};
  if (term.kind() == NodeKind::mul && term.args()[0].is_constant()) {
    const auto args = term.args();
    if (args.size() == 2) return {args[0].value(), args[1]};
    Node n;
    n.kind = NodeKind::mul;
    n.args.assign(args.begin() + 1, args.end());
    return {args[0].value(), make_node(std::move(n))};
  }
  return {Rational(1), term};
}

// ---------------------------------------------------------------------------
// Smart constructors

Expression add(std::vector<Expression> terms) {
  // flatten
  std::vector<Expression> flat;
  flat.reserve(terms.size());
  for (auto& t : terms) {
    if (t.kind() == NodeKind::add) {
      for (const auto& s : t.args()) flat.push_back(s);
    } else {
      flat.push_back(std::move(t));
    }
  }
  Rational constant(0);
  std::vector<std::pair<Expression, Rational>> parts;  // (rest, coefficient)
  parts.reserve(flat.size());
  for (const auto& t : flat) {
    if (t.is_constant()) {
      constant = constant + t.value();
      continue;
    }
    auto [c, rest] = split_coefficient(t);
    parts.emplace_back(std::move(rest), c);
  }
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return compare(a.first, b.first) < 0; });
  std::vector<Expression> out;
  if (!constant.is_zero()) out.push_back(make_constant(constant));
  for (std::size_t i = 0; i < parts.size();) {
    Rational c = parts[i].second;
    std::size_t j = i + 1;
    while (j < parts.size() && parts[j].first == parts[i].first) {
      c = c + parts[j].second;
      ++j;
    }
    if (!c.is_zero()) {
      if (c.is_one()) {
        out.push_back(parts[i].first);
      } else {
        // coefficient times a non-sum remainder: build the product node directly
        const Expression& rest = parts[i].first;
        Node n;
        n.kind = NodeKind::mul;
        n.args.push_back(make_constant(c));
        if (rest.kind() == NodeKind::mul) {
          for (const auto& f : rest.args()) n.args.push_back(f);
        } else {
          n.args.push_back(rest);
        }
        out.push_back(make_node(std::move(n)));
      }
    }
    i = j;
  }
  if (out.empty()) return zero_expr();
  if (out.size() == 1) return out.front();
  Node n;
  n.kind = NodeKind::add;
  n.args = std::move(out);
  return make_node(std::move(n));
}

Expression mul(std::vector<Expression> factors) {
  Rational coeff(1);
  std::vector<std::pair<Expression, Rational>> powers;  // (base, exponent)
  std::vector<Expression> work = std::move(factors);
  // Worklist flattening: powers that refold into products or constants are
  // pushed back for another pass.
  while (!work.empty()) {
    std::vector<Expression> next;
    for (auto& f : work) {
      if (f.is_constant()) {
        coeff = coeff * f.value();
      } else if (f.kind() == NodeKind::mul) {
        for (const auto& g : f.args()) next.push_back(g);
      } else {
        auto [b, e] = split_power(f);
        powers.emplace_back(std::move(b), e);
      }
    }
    if (coeff.is_zero()) return zero_expr();
    std::sort(powers.begin(), powers.end(), [](const auto& a, const auto& b) { return compare(a.first, b.first) < 0; });
    std::vector<std::pair<Expression, Rational>> merged;
    for (std::size_t i = 0; i < powers.size();) {
      Rational e = powers[i].second;
      std::size_t j = i + 1;
      while (j < powers.size() && powers[j].first == powers[i].first) {
        e = e + powers[j].second;
        ++j;
      }
      if (!e.is_zero()) {
        if (j - i > 1 || powers[i].first.is_constant()) {
          // a merged power may fold further (constants, nested powers)
          Expression folded = pow(powers[i].first, e);
          auto [fb, fe] = split_power(folded);
          if (folded.is_constant() || folded.kind() == NodeKind::mul || !(fb == powers[i].first)) {
            next.push_back(folded);
          } else {
            merged.emplace_back(powers[i].first, e);
          }
        } else {
          merged.emplace_back(powers[i].first, e);
        }
      }
      i = j;
    }
    powers = std::move(merged);
    work = std::move(next);
  }
  if (coeff.is_zero()) return zero_expr();
  if (powers.empty()) return make_constant(coeff);

  std::vector<Expression> out;
  for (const auto& [b, e] : powers) out.push_back(e.is_one() ? b : make_pow_node(b, e));

  if (out.size() == 1) {
    if (coeff.is_one()) return out.front();
    if (out.front().kind() == NodeKind::add) {
      // numeric coefficients distribute over sums
      std::vector<Expression> terms;
      for (const auto& t : out.front().args()) terms.push_back(mul({make_constant(coeff), t}));
      return add(std::move(terms));
    }
  }
  std::sort(out.begin(), out.end(), [](const Expression& a, const Expression& b) {
    const auto pa = split_power(a);
    const auto pb = split_power(b);
    if (int c = compare(pa.first, pb.first); c != 0) return c < 0;
    return cmp_rational(pa.second, pb.second) < 0;
  });
  Node n;
  n.kind = NodeKind::mul;
  if (!coeff.is_one()) n.args.push_back(make_constant(coeff));
  for (auto& f : out) n.args.push_back(std::move(f));
  return make_node(std::move(n));
}

Expression pow(const Expression& base, const Rational& e) {
  if (e.is_zero()) return Expression(Rational(1));
  if (e.is_one()) return base;
  switch (base.kind()) {
    case NodeKind::constant: return constant_pow(base.value(), e);
    case NodeKind::pow: {
      // (b^a)^e = b^(a e) holds wherever both sides are real when e is an
      // integer or a has an odd numerator.
      const Rational& a = base.exponent();
      if (e.is_integer() || is_odd(a.num())) return pow(base.args()[0], a * e);
      break;
    }
    case NodeKind::mul: {
      if (e.is_integer()) {
        std::vector<Expression> fs;
        for (const auto& f : base.args()) fs.push_back(pow(f, e));
        return mul(std::move(fs));
      }
      auto [c, rest] = split_coefficient(base);
      if (!c.is_one() && !c.is_negative()) return mul({constant_pow(c, e), pow(rest, e)});
      break;
    }
    default: break;
  }
  return make_pow_node(base, e);
}

Expression sqrt(const Expression& e) { return pow(e, Rational(1, 2)); }

Expression apply(Func f, const Expression& arg) {
  if (arg.is_constant()) {
    const Rational& v = arg.value();
    switch (f) {
      case Func::sin:
      case Func::tan:
        if (v.is_zero()) return zero_expr();
        break;
      case Func::cos:
      case Func::exp:
        if (v.is_zero()) return Expression(Rational(1));
        break;
      case Func::log:
        if (v.is_one()) return zero_expr();
        break;
    }
  }
  Node n;
  n.kind = NodeKind::function;
  n.func = f;
  n.args = {arg};
  return make_node(std::move(n));
}

Expression operator+(const Expression& a, const Expression& b) { return add({a, b}); }
Expression operator-(const Expression& a, const Expression& b) { return add({a, mul({Expression(Rational(-1)), b})}); }
Expression operator*(const Expression& a, const Expression& b) { return mul({a, b}); }
Expression operator/(const Expression& a, const Expression& b) { return mul({a, pow(b, Rational(-1))}); }
Expression operator-(const Expression& a) { return mul({Expression(Rational(-1)), a}); }

// ---------------------------------------------------------------------------
// Calculus and rewriting

Expression differentiate(const Expression& e, const Symbol& s) {
  if (!e.depends_on(s)) return zero_expr();
  switch (e.kind()) {
    case NodeKind::constant: return zero_expr();
    case NodeKind::symbol: return Expression(Rational(e.symbol() == s ? 1 : 0));
    case NodeKind::add: {
      std::vector<Expression> terms;
      for (const auto& t : e.args()) terms.push_back(differentiate(t, s));
      return add(std::move(terms));
    }
    case NodeKind::mul: {
      const auto fs = e.args();
      std::vector<Expression> terms;
      for (std::size_t i = 0; i < fs.size(); ++i) {
        if (!fs[i].depends_on(s)) continue;
        std::vector<Expression> prod;
        prod.reserve(fs.size());
        for (std::size_t j = 0; j < fs.size(); ++j) prod.push_back(j == i ? differentiate(fs[j], s) : fs[j]);
        terms.push_back(mul(std::move(prod)));
      }
      return add(std::move(terms));
    }
    case NodeKind::pow: {
      const Expression& b = e.args()[0];
      const Rational& k = e.exponent();
      return mul({Expression(k), pow(b, k - Rational(1)), differentiate(b, s)});
    }
    case NodeKind::function: {
      const Expression& u = e.args()[0];
      const Expression du = differentiate(u, s);
      switch (e.func()) {
        case Func::sin: return apply(Func::cos, u) * du;
        case Func::cos: return -(apply(Func::sin, u) * du);
        case Func::tan: return pow(apply(Func::cos, u), Rational(-2)) * du;
        case Func::exp: return e * du;
        case Func::log: return pow(u, Rational(-1)) * du;
      }
    }
  }
  return zero_expr();
}

namespace {

template <class Leaf>
Expression rebuild(const Expression& e, const Leaf& leaf) {
  if (auto r = leaf(e)) return *r;
  switch (e.kind()) {
    case NodeKind::constant:
    case NodeKind::symbol: return e;
    case NodeKind::add: {
      std::vector<Expression> ts;
      for (const auto& t : e.args()) ts.push_back(rebuild(t, leaf));
      return add(std::move(ts));
    }
    case NodeKind::mul: {
      std::vector<Expression> ts;
      for (const auto& t : e.args()) ts.push_back(rebuild(t, leaf));
      return mul(std::move(ts));
    }
    case NodeKind::pow: return pow(rebuild(e.args()[0], leaf), e.exponent());
    case NodeKind::function: return apply(e.func(), rebuild(e.args()[0], leaf));
  }
  return e;
}

}  // namespace

Expression substitute(const Expression& e, const std::map<Symbol, Expression>& values) {
  return rebuild(e, [&](const Expression& x) -> std::optional<Expression> {
    const auto& fs = x.free_symbols();
    if (std::none_of(fs.begin(), fs.end(), [&](const Symbol& s) { return values.count(s) > 0; })) return x;
    if (x.kind() == NodeKind::symbol) return values.at(x.symbol());
    return std::nullopt;
  });
}

Expression replace(const Expression& e, const Expression& target, const Expression& replacement) {
  return rebuild(e, [&](const Expression& x) -> std::optional<Expression> {
    if (x == target) return replacement;
    if (x.size() < target.size()) return x;
    return std::nullopt;
  });
}

namespace {

std::vector<Expression> terms_of(const Expression& e) {
  if (e.kind() == NodeKind::add) return {e.args().begin(), e.args().end()};
  return {e};
}

}  // namespace

Expression expand(const Expression& e, std::size_t max_terms) {
  switch (e.kind()) {
    case NodeKind::constant:
    case NodeKind::symbol: return e;
    case NodeKind::add: {
      std::vector<Expression> ts;
      for (const auto& t : e.args()) ts.push_back(expand(t, max_terms));
      return add(std::move(ts));
    }
    case NodeKind::function: return apply(e.func(), expand(e.args()[0], max_terms));
    case NodeKind::pow: {
      Expression b = expand(e.args()[0], max_terms);
      const Rational& k = e.exponent();
      if (b.kind() == NodeKind::add && k.is_integer() && k.num() > 1 && k.num() <= 8) {
        std::vector<Expression> acc = terms_of(b);
        for (std::int64_t i = 1; i < k.num(); ++i) {
          if (acc.size() * b.args().size() > max_terms) return pow(b, k);
          std::vector<Expression> next;
          for (const auto& x : acc)
            for (const auto& y : b.args()) next.push_back(x * y);
          acc = terms_of(add(std::move(next)));
        }
        return add(std::move(acc));
      }
      return pow(b, k);
    }
    case NodeKind::mul: {
      std::vector<Expression> acc{Expression(Rational(1))};
      for (const auto& f : e.args()) {
        const Expression ef = expand(f, max_terms);
        const auto ts = terms_of(ef);
        if (acc.size() * ts.size() > max_terms) {
          std::vector<Expression> fs;
          for (const auto& g : e.args()) fs.push_back(expand(g, max_terms));
          return mul(std::move(fs));
        }
        std::vector<Expression> next;
        next.reserve(acc.size() * ts.size());
        for (const auto& a : acc)
          for (const auto& t : ts) next.push_back(a * t);
        acc = terms_of(add(std::move(next)));
      }
      return add(std::move(acc));
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Numeric evaluation

namespace detail {

double ipow(double b, std::int64_t n) {
  if (n < 0) return 1.0 / ipow(b, -n);
  if (n > 32) return std::pow(b, static_cast<double>(n));
  double r = 1.0;
  while (n > 0) {
    if (n & 1) r *= b;
    n >>= 1;
    b *= b;
  }
  return r;
}

double pow_rational(double base, const Rational& e, const Expression& context) {
  if (base == 0.0 && e.is_negative()) throw DomainError("division by zero", context.to_string());
  if (e.is_integer()) return ipow(base, e.num());
  const bool even_root = (e.den() % 2) == 0;
  if (base < 0.0 && even_root) throw DomainError("even root of a negative number", context.to_string());
  if (e.den() == 2) return ipow(std::sqrt(base), e.num());
  double r = std::pow(std::fabs(base), e.to_double());
  if (base < 0.0 && (e.num() % 2) != 0) r = -r;
  return r;
}

double apply_func(Func f, double x, const Expression& context) {
  switch (f) {
    case Func::sin: return std::sin(x);
    case Func::cos: return std::cos(x);
    case Func::tan: {
      if (std::cos(x) == 0.0) throw DomainError("tangent pole", context.to_string());
      return std::tan(x);
    }
    case Func::exp: return std::exp(x);
    case Func::log:
      if (!(x > 0.0)) throw DomainError("logarithm of a non-positive number", context.to_string());
      return std::log(x);
  }
  return 0.0;
}

}  // namespace detail

double evaluate(const Expression& e, const Assignment& values) {
  switch (e.kind()) {
    case NodeKind::constant: return e.value().to_double();
    case NodeKind::symbol: {
      auto it = values.find(e.symbol());
      if (it == values.end()) throw SymbolError("no value assigned to " + e.symbol().name());
      return it->second;
    }
    case NodeKind::add: {
      double s = 0.0;
      for (const auto& t : e.args()) s += evaluate(t, values);
      return s;
    }
    case NodeKind::mul: {
      double p = 1.0;
      for (const auto& t : e.args()) p *= evaluate(t, values);
      return p;
    }
    case NodeKind::pow: return detail::pow_rational(evaluate(e.args()[0], values), e.exponent(), e);
    case NodeKind::function: return detail::apply_func(e.func(), evaluate(e.args()[0], values), e);
  }
  return 0.0;
}

CompiledExpression::CompiledExpression(const Expression& e, std::span<const Symbol> slots) {
  std::size_t depth = 0;
  std::function<void(const Expression&)> emit = [&](const Expression& x) {
    switch (x.kind()) {
      case NodeKind::constant: {
        Op op;
        op.code = Code::constant;
        op.c = x.value().to_double();
        ops_.push_back(op);
        ++depth;
        break;
      }
      case NodeKind::symbol: {
        auto it = std::find(slots.begin(), slots.end(), x.symbol());
        if (it == slots.end()) throw SymbolError("symbol " + x.symbol().name() + " is not a coordinate of this space");
        Op op;
        op.code = Code::load;
        op.n = static_cast<std::uint32_t>(it - slots.begin());
        ops_.push_back(op);
        ++depth;
        break;
      }
      case NodeKind::add:
      case NodeKind::mul: {
        for (const auto& a : x.args()) emit(a);
        Op op;
        op.code = x.kind() == NodeKind::add ? Code::add : Code::mul;
        op.n = static_cast<std::uint32_t>(x.args().size());
        ops_.push_back(op);
        depth -= x.args().size() - 1;
        break;
      }
      case NodeKind::pow: {
        emit(x.args()[0]);
        Op op;
        op.code = Code::pow;
        op.e = x.exponent();
        op.n = static_cast<std::uint32_t>(sources_.size());
        sources_.push_back(x);
        ops_.push_back(op);
        break;
      }
      case NodeKind::function: {
        emit(x.args()[0]);
        Op op;
        op.code = Code::func;
        op.f = x.func();
        op.n = static_cast<std::uint32_t>(sources_.size());
        sources_.push_back(x);
        ops_.push_back(op);
        break;
      }
    }
    depth_ = std::max(depth_, depth);
  };
  emit(e);
}

double CompiledExpression::operator()(std::span<const double> values) const {
  if (ops_.empty()) return 0.0;
  constexpr std::size_t kInline = 64;
  double inline_stack[kInline];
  std::vector<double> heap;
  double* stack = inline_stack;
  if (depth_ > kInline) {
    heap.resize(depth_);
    stack = heap.data();
  }
  std::size_t top = 0;
  for (const Op& op : ops_) {
    switch (op.code) {
      case Code::constant: stack[top++] = op.c; break;
      case Code::load: stack[top++] = values[op.n]; break;
      case Code::add: {
        double s = 0.0;
        for (std::uint32_t i = 0; i < op.n; ++i) s += stack[top - op.n + i];
        top -= op.n;
        stack[top++] = s;
        break;
      }
      case Code::mul: {
        double p = 1.0;
        for (std::uint32_t i = 0; i < op.n; ++i) p *= stack[top - op.n + i];
        top -= op.n;
        stack[top++] = p;
        break;
      }
      case Code::pow: stack[top - 1] = detail::pow_rational(stack[top - 1], op.e, sources_[op.n]); break;
      case Code::func: stack[top - 1] = detail::apply_func(op.f, stack[top - 1], sources_[op.n]); break;
    }
  }
  return stack[0];
}

// ---------------------------------------------------------------------------
// Equivalence

const char* to_string(Equality e) {
  switch (e) {
    case Equality::identical: return "identical";
    case Equality::numerically_equal: return "numerically equal";
    case Equality::different: return "different";
  }
  return "?";
}

Equality equivalent(const Expression& a, const Expression& b, const EquivalenceOptions& options) {
  if (a == b) return Equality::identical;
  const Expression diff = a - b;
  if (diff.is_zero()) return Equality::identical;
  if (diff.size() < 4000 && expand(diff).is_zero()) return Equality::identical;

  std::vector<Symbol> syms = diff.free_symbols();
  for (const auto& s : a.free_symbols()) syms.push_back(s);
  for (const auto& s : b.free_symbols()) syms.push_back(s);
  std::sort(syms.begin(), syms.end());
  syms.erase(std::unique(syms.begin(), syms.end()), syms.end());
  const CompiledExpression ca(a, syms);
  const CompiledExpression cb(b, syms);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> dist(options.lo, options.hi);
  std::vector<double> point(syms.size());
  int good = 0;
  const int max_attempts = options.samples * 20;
  for (int attempt = 0; attempt < max_attempts && good < options.samples; ++attempt) {
    for (auto& x : point) x = dist(rng);
    double va = 0.0;
    double vb = 0.0;
    try {
      va = ca(point);
      vb = cb(point);
    } catch (const DomainError&) {
      continue;
    }
    const double scale = std::max({1.0, std::fabs(va), std::fabs(vb)});
    if (!(std::fabs(va - vb) <= options.relative_tolerance * scale)) return Equality::different;
    ++good;
  }
  return good == options.samples ? Equality::numerically_equal : Equality::different;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

void print(std::ostringstream& os, const Expression& e);

bool is_atom(const Expression& e) {
  switch (e.kind()) {
    case NodeKind::symbol:
    case NodeKind::function: return true;
    case NodeKind::constant: return e.value().is_integer() && !e.value().is_negative();
    case NodeKind::pow: return e.exponent() == Rational(1, 2);  // prints as sqrt(...)
    default: return false;
  }
}

void print_atom(std::ostringstream& os, const Expression& e) {
  if (is_atom(e)) {
    print(os, e);
  } else {
    os << '(';
    print(os, e);
    os << ')';
  }
}

// b^k for k > 0
void print_positive_power(std::ostringstream& os, const Expression& b, const Rational& k) {
  if (k.is_one()) {
    if (b.kind() == NodeKind::add || b.kind() == NodeKind::mul) {
      os << '(';
      print(os, b);
      os << ')';
    } else {
      print(os, b);
    }
    return;
  }
  if (k == Rational(1, 2)) {
    os << "sqrt(";
    print(os, b);
    os << ')';
    return;
  }
  print_atom(os, b);
  if (k.is_integer()) {
    os << '^' << k.num();
  } else {
    os << "^(" << k.to_string() << ')';
  }
}

void print_product(std::ostringstream& os, const Rational& coeff, std::span<const Expression> factors) {
  std::vector<std::pair<Expression, Rational>> num;
  std::vector<std::pair<Expression, Rational>> den;
  for (const auto& f : factors) {
    auto [b, k] = split_power(f);
    if (k.is_negative()) {
      den.emplace_back(b, -k);
    } else {
      num.emplace_back(b, k);
    }
  }
  if (coeff.is_negative()) os << '-';
  const std::int64_t cn = coeff.num() < 0 ? -coeff.num() : coeff.num();
  bool first = true;
  if (cn != 1 || num.empty()) {
    os << cn;
    first = false;
  }
  for (const auto& [b, k] : num) {
    if (!first) os << '*';
    print_positive_power(os, b, k);
    first = false;
  }
  const std::size_t den_count = den.size() + (coeff.den() != 1 ? 1 : 0);
  if (den_count == 0) return;
  os << '/';
  if (den_count > 1) os << '(';
  bool dfirst = true;
  if (coeff.den() != 1) {
    os << coeff.den();
    dfirst = false;
  }
  for (const auto& [b, k] : den) {
    if (!dfirst) os << '*';
    print_positive_power(os, b, k);
    dfirst = false;
  }
  if (den_count > 1) os << ')';
}

void print(std::ostringstream& os, const Expression& e) {
  switch (e.kind()) {
    case NodeKind::constant: os << e.value().to_string(); return;
    case NodeKind::symbol: os << e.symbol().name(); return;
    case NodeKind::function:
      os << func_name(e.func()) << '(';
      print(os, e.args()[0]);
      os << ')';
      return;
    case NodeKind::pow:
      print_product(os, Rational(1), std::span<const Expression>(&e, 1));
      return;
    case NodeKind::mul: {
      auto [c, rest] = split_coefficient(e);
      if (rest.kind() == NodeKind::mul) {
        print_product(os, c, rest.args());
      } else {
        print_product(os, c, std::span<const Expression>(&rest, 1));
      }
      return;
    }
    case NodeKind::add: {
      bool first = true;
      for (const auto& t : e.args()) {
        auto [c, rest] = split_coefficient(t);
        if (first) {
          print(os, t);
          first = false;
        } else if (c.is_negative()) {
          os << " - ";
          print(os, -t);
        } else {
          os << " + ";
          print(os, t);
        }
      }
      return;
    }
  }
}

}  // namespace

std::string Expression::to_string() const {
  std::ostringstream os;
  print(os, *this);
  return os.str();
}

}  // namespace msym
