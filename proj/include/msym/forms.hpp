#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msym/errors.hpp"
#include "msym/expression.hpp"
#include "msym/geometry.hpp"

namespace msym {

/// Strictly increasing list of coordinate positions labelling a basis form.
using IndexTuple = std::vector<std::uint16_t>;

namespace detail {

inline bool coeff_is_zero(const Expression& e) { return e.is_zero(); }
inline bool coeff_is_zero(double d) { return d == 0.0; }
inline bool coeff_is_one(const Expression& e) { return e.is_one(); }
inline bool coeff_is_one(double d) { return d == 1.0; }

/// Sorts `idx` in place and returns the permutation sign, or 0 when an index
/// repeats (the wedge vanishes).
inline int canonicalize(IndexTuple& idx) {
  int sign = 1;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    for (std::size_t j = i; j > 0 && idx[j - 1] >= idx[j]; --j) {
      if (idx[j - 1] == idx[j]) return 0;
      std::swap(idx[j - 1], idx[j]);
      sign = -sign;
    }
  }
  return sign;
}

inline void require_same_space(const CoordinateSpace& a, const CoordinateSpace& b) {
  if (!(a == b)) throw ModelError("operands live on different coordinate spaces");
}

}  // namespace detail

/// Vector field sum_c X^c d/dz^c, stored densely over the space's coordinates.
template <class Coeff>
class BasicVectorField {
 public:
  explicit BasicVectorField(SpacePtr space) : space_(std::move(space)), comps_(space_->dim(), Coeff(0)) {}

  static BasicVectorField coordinate(SpacePtr space, const Symbol& s) {
    BasicVectorField f(space);
    f.comps_[space->require(s)] = Coeff(1);
    return f;
  }

  const SpacePtr& space() const { return space_; }
  std::size_t size() const { return comps_.size(); }
  const Coeff& operator[](std::size_t i) const { return comps_[i]; }
  Coeff& operator[](std::size_t i) { return comps_[i]; }
  const Coeff& component(const Symbol& s) const { return comps_[space_->require(s)]; }
  void set(const Symbol& s, Coeff c) { comps_[space_->require(s)] = std::move(c); }
  const std::vector<Coeff>& components() const { return comps_; }

 private:
  SpacePtr space_;
  std::vector<Coeff> comps_;
};

/// Horizontal fields H_nu = d/dx^nu + (vertical part), one per base
/// direction. The base components follow the Kronecker pattern exactly.
template <class Coeff>
class BasicConnection {
 public:
  explicit BasicConnection(std::vector<BasicVectorField<Coeff>> horizontals) : h_(std::move(horizontals)) {
    if (h_.empty()) throw ModelError("connection needs one horizontal field per base direction");
    const SpacePtr& sp = h_.front().space();
    if (static_cast<int>(h_.size()) != sp->base_dim()) {
      throw ModelError("connection needs one horizontal field per base direction");
    }
    for (std::size_t nu = 0; nu < h_.size(); ++nu) {
      detail::require_same_space(*sp, *h_[nu].space());
      for (int mu = 1; mu <= sp->base_dim(); ++mu) {
        const Coeff& c = h_[nu][sp->base_index(mu)];
        const bool ok = (static_cast<std::size_t>(mu) == nu + 1) ? detail::coeff_is_one(c) : detail::coeff_is_zero(c);
        if (!ok) throw ModelError("connection base components must be the Kronecker delta");
      }
    }
  }

  const SpacePtr& space() const { return h_.front().space(); }
  const BasicVectorField<Coeff>& horizontal(int nu) const { return h_.at(static_cast<std::size_t>(nu - 1)); }
  const std::vector<BasicVectorField<Coeff>>& horizontals() const { return h_; }

 private:
  std::vector<BasicVectorField<Coeff>> h_;
};

/// Degree-k form sum_I c_I dz^{I_1}^...^dz^{I_k} over strictly increasing I.
template <class Coeff>
class BasicForm {
 public:
  BasicForm(SpacePtr space, int degree) : space_(std::move(space)), degree_(degree) {
    if (degree < 0 || static_cast<std::size_t>(degree) > space_->dim()) {
      throw ModelError("form degree exceeds the space dimension");
    }
  }

  /// Single term c * dz^{idx_1}^...; idx need not be sorted.
  static BasicForm monomial(SpacePtr space, IndexTuple idx, Coeff c) {
    BasicForm f(space, static_cast<int>(idx.size()));
    f.add_term(std::move(idx), std::move(c));
    return f;
  }

  static BasicForm scalar(SpacePtr space, Coeff c) { return monomial(std::move(space), {}, std::move(c)); }

  /// d(s) for a coordinate symbol.
  static BasicForm differential(SpacePtr space, const Symbol& s) {
    const auto i = static_cast<std::uint16_t>(space->require(s));
    return monomial(space, {i}, Coeff(1));
  }

  const SpacePtr& space() const { return space_; }
  int degree() const { return degree_; }
  const std::map<IndexTuple, Coeff>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  Coeff coefficient(const IndexTuple& sorted) const {
    auto it = terms_.find(sorted);
    return it == terms_.end() ? Coeff(0) : it->second;
  }

  /// Adds c * dz^idx, reordering idx and adjusting the sign.
  void add_term(IndexTuple idx, const Coeff& c) {
    if (static_cast<int>(idx.size()) != degree_) throw ModelError("term degree does not match form degree");
    for (auto i : idx) {
      if (i >= space_->dim()) throw ModelError("basis index outside the space");
    }
    const int sign = detail::canonicalize(idx);
    if (sign == 0 || detail::coeff_is_zero(c)) return;
    auto [it, inserted] = terms_.try_emplace(std::move(idx), sign > 0 ? c : Coeff(-c));
    if (!inserted) {
      it->second = sign > 0 ? Coeff(it->second + c) : Coeff(it->second - c);
      if (detail::coeff_is_zero(it->second)) terms_.erase(it);
    }
  }

  BasicForm& operator+=(const BasicForm& o) {
    check_compatible(o);
    for (const auto& [k, c] : o.terms_) add_term(k, c);
    return *this;
  }
  BasicForm& operator-=(const BasicForm& o) {
    check_compatible(o);
    for (const auto& [k, c] : o.terms_) add_term(k, Coeff(-c));
    return *this;
  }
  friend BasicForm operator+(BasicForm a, const BasicForm& b) { return a += b; }
  friend BasicForm operator-(BasicForm a, const BasicForm& b) { return a -= b; }
  friend BasicForm operator*(const Coeff& s, const BasicForm& f) {
    BasicForm out(f.space_, f.degree_);
    for (const auto& [k, c] : f.terms_) out.add_term(k, Coeff(s * c));
    return out;
  }
  BasicForm operator-() const { return Coeff(-1) * *this; }

  /// Coefficient-wise map (e.g. substitution, numeric evaluation).
  template <class Out, class F>
  BasicForm<Out> map_coefficients(SpacePtr target, F&& f) const {
    BasicForm<Out> out(std::move(target), degree_);
    for (const auto& [k, c] : terms_) out.add_term(k, f(c));
    return out;
  }

 private:
  void check_compatible(const BasicForm& o) const {
    detail::require_same_space(*space_, *o.space_);
    if (o.degree_ != degree_) throw ModelError("cannot add forms of different degree");
  }

  SpacePtr space_;
  int degree_;
  std::map<IndexTuple, Coeff> terms_;
};

using CoordinateForm = BasicForm<Expression>;
using NumericForm = BasicForm<double>;
using VectorField = BasicVectorField<Expression>;
using NumericVectorField = BasicVectorField<double>;
using ConnectionCoefficients = BasicConnection<Expression>;
using NumericConnection = BasicConnection<double>;

template <class Coeff>
BasicForm<Coeff> wedge(const BasicForm<Coeff>& a, const BasicForm<Coeff>& b) {
  detail::require_same_space(*a.space(), *b.space());
  BasicForm<Coeff> out(a.space(), a.degree() + b.degree());
  for (const auto& [ka, ca] : a.terms()) {
    for (const auto& [kb, cb] : b.terms()) {
      IndexTuple idx = ka;
      idx.insert(idx.end(), kb.begin(), kb.end());
      out.add_term(std::move(idx), Coeff(ca * cb));
    }
  }
  return out;
}

/// Interior product i(X)w, an antiderivation acting from the left:
/// i(X)(dz^{I_1}^...^dz^{I_k}) = sum_r (-1)^r X^{I_r} dz^{I without I_r}.
template <class Coeff>
BasicForm<Coeff> interior(const BasicVectorField<Coeff>& x, const BasicForm<Coeff>& w) {
  detail::require_same_space(*x.space(), *w.space());
  if (w.degree() == 0) throw ModelError("interior product of a 0-form");
  BasicForm<Coeff> out(w.space(), w.degree() - 1);
  for (const auto& [k, c] : w.terms()) {
    for (std::size_t r = 0; r < k.size(); ++r) {
      const Coeff& xr = x[k[r]];
      if (detail::coeff_is_zero(xr)) continue;
      IndexTuple rest;
      rest.reserve(k.size() - 1);
      for (std::size_t j = 0; j < k.size(); ++j) {
        if (j != r) rest.push_back(k[j]);
      }
      const Coeff term = xr * c;
      out.add_term(std::move(rest), (r % 2 == 0) ? term : Coeff(-term));
    }
  }
  return out;
}

/// i(X_r)...i(X_1)w: the first field is inserted first, so a full contraction
/// of a degree-r form equals w(X_1, ..., X_r).
template <class Coeff>
BasicForm<Coeff> contract_multivector(const BasicForm<Coeff>& w, std::span<const BasicVectorField<Coeff>> fields) {
  if (static_cast<int>(fields.size()) > w.degree()) {
    throw ModelError("multivector order exceeds the form degree");
  }
  BasicForm<Coeff> out = w;
  for (const auto& x : fields) out = interior(x, out);
  return out;
}

/// Pointwise multilinear evaluation w(X_1, ..., X_k) via the determinant
/// expansion of each basis term.
template <class Coeff>
Coeff apply_form(const BasicForm<Coeff>& w, std::span<const BasicVectorField<Coeff>> fields) {
  if (static_cast<int>(fields.size()) != w.degree()) throw ModelError("need exactly k vectors to evaluate a k-form");
  const std::size_t k = fields.size();
  std::vector<std::size_t> perm(k);
  Coeff total(0);
  for (const auto& [idx, c] : w.terms()) {
    for (std::size_t i = 0; i < k; ++i) perm[i] = i;
    Coeff det(0);
    do {
      // sign of the permutation by counting inversions
      int inv = 0;
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) inv += perm[a] > perm[b] ? 1 : 0;
      Coeff prod(1);
      for (std::size_t i = 0; i < k; ++i) prod = prod * fields[i][idx[perm[i]]];
      det = (inv % 2 == 0) ? Coeff(det + prod) : Coeff(det - prod);
    } while (std::next_permutation(perm.begin(), perm.end()));
    total = total + c * det;
  }
  return total;
}

/// (1,1)-tensor insertion (i(h)w)(X_1..X_k) = sum_i w(X_1, .., hX_i, .., X_k),
/// with h the horizontal projector of the connection: each slot dz^j is
/// replaced by dz^j o h = sum_nu H_nu^j dx^nu.
template <class Coeff>
BasicForm<Coeff> insert_endomorphism(const BasicForm<Coeff>& w, const BasicConnection<Coeff>& conn) {
  detail::require_same_space(*w.space(), *conn.space());
  if (w.degree() < 1) throw ModelError("insertion needs a form of degree at least 1");
  const SpacePtr& sp = w.space();
  const int m = sp->base_dim();
  BasicForm<Coeff> out(sp, w.degree());
  for (const auto& [k, c] : w.terms()) {
    for (std::size_t r = 0; r < k.size(); ++r) {
      for (int nu = 1; nu <= m; ++nu) {
        const Coeff& hv = conn.horizontal(nu)[k[r]];
        if (detail::coeff_is_zero(hv)) continue;
        IndexTuple idx = k;
        idx[r] = static_cast<std::uint16_t>(sp->base_index(nu));
        out.add_term(std::move(idx), Coeff(c * hv));
      }
    }
  }
  return out;
}

/// dx^1 ^ ... ^ dx^m on a space containing the base coordinates.
template <class Coeff = Expression>
BasicForm<Coeff> volume_form(const SpacePtr& space) {
  IndexTuple idx;
  for (int nu = 1; nu <= space->base_dim(); ++nu) idx.push_back(static_cast<std::uint16_t>(space->base_index(nu)));
  return BasicForm<Coeff>::monomial(space, idx, Coeff(1));
}

/// d^{m-1}x_nu = i(d/dx^nu) d^m x.
template <class Coeff = Expression>
BasicForm<Coeff> hypersurface_form(const SpacePtr& space, int nu) {
  return interior(BasicVectorField<Coeff>::coordinate(space, Symbol::x(nu)), volume_form<Coeff>(space));
}

// ---------------------------------------------------------------------------
// Symbolic-only operations

/// Exterior derivative. Throws ModelError when the result would exceed the
/// space dimension or a coefficient uses a symbol outside the space.
CoordinateForm exterior_derivative(const CoordinateForm& w);

/// d f for a scalar expression.
CoordinateForm differential(const SpacePtr& space, const Expression& f);

/// Pullback along Phi: source space -> target space, given as an expression
/// over source coordinates for every target coordinate.
CoordinateForm pullback(const CoordinateForm& w, const std::map<Symbol, Expression>& phi, const SpacePtr& source);

/// The identity entries of a pullback map for the coordinates two spaces share.
std::map<Symbol, Expression> identity_map(const CoordinateSpace& space);

VectorField lie_bracket(const VectorField& a, const VectorField& b);

/// Substitutes values into every coefficient.
CoordinateForm substitute(const CoordinateForm& w, const std::map<Symbol, Expression>& values);

NumericForm evaluate(const CoordinateForm& w, const Assignment& point);
NumericVectorField evaluate(const VectorField& x, const Assignment& point);
NumericConnection evaluate(const ConnectionCoefficients& c, const Assignment& point);

/// Coefficient-wise comparison using `equivalent`; returns the weakest
/// verdict over all basis terms.
Equality compare_forms(const CoordinateForm& a, const CoordinateForm& b, const EquivalenceOptions& options = {});

/// Largest coefficient magnitude.
double max_abs(const NumericForm& w);

/// Text report, one line per basis term: `dx1^dy1: <expression>`.
std::string to_string(const CoordinateForm& w);
std::string basis_name(const CoordinateSpace& space, const IndexTuple& idx);

/// Coefficients compiled against the space's coordinate order, for repeated
/// numeric evaluation.
class CompiledForm {
 public:
  explicit CompiledForm(const CoordinateForm& w);
  /// `values` follows the space's coordinate order.
  NumericForm operator()(std::span<const double> values) const;

 private:
  SpacePtr space_;
  int degree_;
  std::vector<std::pair<IndexTuple, CompiledExpression>> terms_;
};

/// Rank by Gaussian elimination with partial pivoting; entries below
/// `relative_tolerance * max|entry|` count as zero.
std::size_t matrix_rank(std::vector<std::vector<double>> rows, double relative_tolerance = 1e-9);

/// dim{X : i(X)w = 0} at a point: space dimension minus the rank of X -> i(X)w.
std::size_t kernel_dimension(const NumericForm& w);
std::size_t kernel_dimension(const CoordinateForm& w, const Assignment& point);

struct InvolutivityWitness {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t point = 0;  // index into the sample list
};

struct InvolutivityResult {
  bool involutive = true;
  std::optional<InvolutivityWitness> witness;
};

/// Numeric Frobenius test: every bracket [X_i, X_j] must lie in the span of
/// the fields at every sample point. Throws ModelError if the fields are
/// linearly dependent at a sample point.
InvolutivityResult involutivity_check(std::span<const VectorField> fields, std::span<const Assignment> points,
                                      double relative_tolerance = 1e-9);

}  // namespace msym
