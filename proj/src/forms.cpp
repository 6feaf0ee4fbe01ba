#include "msym/forms.hpp"

#include <cmath>
#include <sstream>

namespace msym {

namespace {

std::size_t space_index(const SpacePtr& space, const Symbol& s) {
  auto i = space->index_of(s);
  if (!i) throw ModelError("coefficient uses " + s.name() + ", which is not a coordinate of " + to_string(space->tag()));
  return *i;
}

}  // namespace

CoordinateForm differential(const SpacePtr& space, const Expression& f) {
  CoordinateForm out(space, 1);
  for (const Symbol& s : f.free_symbols()) {
    const auto i = static_cast<std::uint16_t>(space_index(space, s));
    out.add_term({i}, differentiate(f, s));
  }
  return out;
}

CoordinateForm exterior_derivative(const CoordinateForm& w) {
  const SpacePtr& sp = w.space();
  if (static_cast<std::size_t>(w.degree()) + 1 > sp->dim()) {
    throw ModelError("exterior derivative would exceed the space dimension");
  }
  CoordinateForm out(sp, w.degree() + 1);
  for (const auto& [k, c] : w.terms()) {
    for (const Symbol& s : c.free_symbols()) {
      const auto i = static_cast<std::uint16_t>(space_index(sp, s));
      IndexTuple idx;
      idx.reserve(k.size() + 1);
      idx.push_back(i);
      idx.insert(idx.end(), k.begin(), k.end());
      out.add_term(std::move(idx), differentiate(c, s));
    }
  }
  return out;
}

std::map<Symbol, Expression> identity_map(const CoordinateSpace& space) {
  std::map<Symbol, Expression> out;
  for (const Symbol& s : space.coordinates()) out.emplace(s, Expression(s));
  return out;
}

CoordinateForm pullback(const CoordinateForm& w, const std::map<Symbol, Expression>& phi, const SpacePtr& source) {
  const SpacePtr& target = w.space();
  for (const Symbol& s : target->coordinates()) {
    if (!phi.count(s)) throw SymbolError("pullback map has no entry for " + s.name());
  }
  std::vector<std::optional<CoordinateForm>> dphi(target->dim());
  auto d_of = [&](std::size_t j) -> const CoordinateForm& {
    if (!dphi[j]) dphi[j] = differential(source, phi.at(target->coordinate(j)));
    return *dphi[j];
  };
  CoordinateForm out(source, w.degree());
  for (const auto& [k, c] : w.terms()) {
    CoordinateForm acc = CoordinateForm::scalar(source, substitute(c, phi));
    for (auto j : k) {
      acc = wedge(acc, d_of(j));
      if (acc.is_zero()) break;
    }
    if (!acc.is_zero()) out += acc;
  }
  return out;
}

VectorField lie_bracket(const VectorField& a, const VectorField& b) {
  detail::require_same_space(*a.space(), *b.space());
  const SpacePtr& sp = a.space();
  VectorField out(sp);
  for (std::size_t c = 0; c < sp->dim(); ++c) {
    std::vector<Expression> terms;
    for (std::size_t d = 0; d < sp->dim(); ++d) {
      const Symbol& s = sp->coordinate(d);
      if (!a[d].is_zero()) terms.push_back(a[d] * differentiate(b[c], s));
      if (!b[d].is_zero()) terms.push_back(-(b[d] * differentiate(a[c], s)));
    }
    out[c] = add(std::move(terms));
  }
  return out;
}

CoordinateForm substitute(const CoordinateForm& w, const std::map<Symbol, Expression>& values) {
  return w.map_coefficients<Expression>(w.space(), [&](const Expression& c) { return substitute(c, values); });
}

NumericForm evaluate(const CoordinateForm& w, const Assignment& point) {
  return w.map_coefficients<double>(w.space(), [&](const Expression& c) { return evaluate(c, point); });
}

NumericVectorField evaluate(const VectorField& x, const Assignment& point) {
  NumericVectorField out(x.space());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = evaluate(x[i], point);
  return out;
}

NumericConnection evaluate(const ConnectionCoefficients& c, const Assignment& point) {
  std::vector<NumericVectorField> hs;
  for (const auto& h : c.horizontals()) hs.push_back(evaluate(h, point));
  return NumericConnection(std::move(hs));
}

Equality compare_forms(const CoordinateForm& a, const CoordinateForm& b, const EquivalenceOptions& options) {
  detail::require_same_space(*a.space(), *b.space());
  if (a.degree() != b.degree()) return Equality::different;
  std::vector<IndexTuple> keys;
  for (const auto& [k, c] : a.terms()) keys.push_back(k);
  for (const auto& [k, c] : b.terms()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  Equality worst = Equality::identical;
  for (const auto& k : keys) {
    const Equality e = equivalent(a.coefficient(k), b.coefficient(k), options);
    if (e == Equality::different) return e;
    if (e == Equality::numerically_equal) worst = e;
  }
  return worst;
}

double max_abs(const NumericForm& w) {
  double m = 0.0;
  for (const auto& [k, c] : w.terms()) m = std::max(m, std::fabs(c));
  return m;
}

std::string basis_name(const CoordinateSpace& space, const IndexTuple& idx) {
  if (idx.empty()) return "1";
  std::string out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) out += '^';
    out += 'd' + space.coordinate(idx[i]).name();
  }
  return out;
}

std::string to_string(const CoordinateForm& w) {
  if (w.is_zero()) return "0\n";
  std::ostringstream os;
  for (const auto& [k, c] : w.terms()) os << basis_name(*w.space(), k) << ": " << c.to_string() << '\n';
  return os.str();
}

CompiledForm::CompiledForm(const CoordinateForm& w) : space_(w.space()), degree_(w.degree()) {
  for (const auto& [k, c] : w.terms()) terms_.emplace_back(k, CompiledExpression(c, space_->coordinates()));
}

NumericForm CompiledForm::operator()(std::span<const double> values) const {
  NumericForm out(space_, degree_);
  for (const auto& [k, c] : terms_) out.add_term(k, c(values));
  return out;
}

std::size_t matrix_rank(std::vector<std::vector<double>> rows, double relative_tolerance) {
  if (rows.empty()) return 0;
  const std::size_t ncols = rows.front().size();
  double scale = 0.0;
  for (const auto& r : rows)
    for (double v : r) scale = std::max(scale, std::fabs(v));
  if (scale == 0.0) return 0;
  const double tol = relative_tolerance * scale;
  std::size_t rank = 0;
  for (std::size_t col = 0; col < ncols && rank < rows.size(); ++col) {
    std::size_t pivot = rank;
    for (std::size_t r = rank + 1; r < rows.size(); ++r) {
      if (std::fabs(rows[r][col]) > std::fabs(rows[pivot][col])) pivot = r;
    }
    if (std::fabs(rows[pivot][col]) <= tol) continue;
    std::swap(rows[pivot], rows[rank]);
    for (std::size_t r = rank + 1; r < rows.size(); ++r) {
      const double f = rows[r][col] / rows[rank][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < ncols; ++c) rows[r][c] -= f * rows[rank][c];
    }
    ++rank;
  }
  return rank;
}

std::size_t kernel_dimension(const NumericForm& w) {
  if (w.degree() < 1) throw ModelError("kernel dimension needs a form of degree at least 1");
  const SpacePtr& sp = w.space();
  const std::size_t dim = sp->dim();
  // one column per coordinate direction, one row per (k-1)-tuple
  std::map<IndexTuple, std::vector<double>> rows;
  for (std::size_t d = 0; d < dim; ++d) {
    const NumericForm col = interior(NumericVectorField::coordinate(sp, sp->coordinate(d)), w);
    for (const auto& [k, c] : col.terms()) {
      auto& row = rows[k];
      if (row.empty()) row.assign(dim, 0.0);
      row[d] = c;
    }
  }
  std::vector<std::vector<double>> matrix;
  matrix.reserve(rows.size());
  for (auto& [k, r] : rows) matrix.push_back(std::move(r));
  return dim - matrix_rank(std::move(matrix));
}

std::size_t kernel_dimension(const CoordinateForm& w, const Assignment& point) {
  return kernel_dimension(evaluate(w, point));
}

InvolutivityResult involutivity_check(std::span<const VectorField> fields, std::span<const Assignment> points,
                                      double relative_tolerance) {
  InvolutivityResult result;
  if (fields.empty()) return result;
  for (const auto& f : fields) detail::require_same_space(*fields.front().space(), *f.space());
  const std::size_t r = fields.size();
  std::vector<std::vector<VectorField>> brackets(r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j) brackets[i].push_back(lie_bracket(fields[i], fields[j]));

  for (std::size_t p = 0; p < points.size(); ++p) {
    std::vector<std::vector<double>> base;
    for (const auto& f : fields) base.push_back(evaluate(f, points[p]).components());
    if (matrix_rank(base, relative_tolerance) < r) {
      throw ModelError("fields are linearly dependent at sample point " + std::to_string(p));
    }
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = i + 1; j < r; ++j) {
        auto ext = base;
        ext.push_back(evaluate(brackets[i][j - i - 1], points[p]).components());
        // a bracket negligible against the fields counts as zero
        double fscale = 0.0;
        for (const auto& row : base)
          for (double v : row) fscale = std::max(fscale, std::fabs(v));
        double bscale = 0.0;
        for (double v : ext.back()) bscale = std::max(bscale, std::fabs(v));
        if (bscale <= relative_tolerance * fscale) continue;
        if (matrix_rank(std::move(ext), relative_tolerance) > r) {
          result.involutive = false;
          result.witness = InvolutivityWitness{i, j, p};
          return result;
        }
      }
    }
  }
  return result;
}

}  // namespace msym
