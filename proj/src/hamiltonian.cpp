#include "msym/hamiltonian.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "msym/errors.hpp"
#include "msym/lagrangian.hpp"

namespace msym {

const char* to_string(InverseKind k) {
  switch (k) {
    case InverseKind::linear: return "linear";
    case InverseKind::radial: return "radial";
    case InverseKind::numeric: return "numeric";
  }
  return "?";
}

namespace {

bool has_velocity(const Expression& e) { return e.depends_on_kind(SymbolKind::velocity); }

std::map<Symbol, Expression> zero_velocities(int m, int n) {
  std::map<Symbol, Expression> out;
  for (const auto& v : velocity_symbols(m, n)) out.emplace(v, Expression(0));
  return out;
}

// v = H^{-1}(p - b) when dL/dv = H v + b with H free of v.
std::optional<std::map<Symbol, Expression>> linear_inverse(const FieldModel& model) {
  const auto vs = velocity_symbols(model.m, model.n);
  const auto ps = momentum_symbols(model.m, model.n);
  if (vs.size() > 8) return std::nullopt;
  const ExpressionMatrix h = velocity_hessian(model);
  for (const auto& row : h)
    for (const auto& e : row)
      if (has_velocity(e)) return std::nullopt;
  Expression det = determinant(h);
  if (det.size() < 4000) det = expand(det);
  if (det.is_zero()) return std::nullopt;
  const auto at_zero = zero_velocities(model.m, model.n);
  std::vector<Expression> rhs;
  for (std::size_t j = 0; j < vs.size(); ++j) {
    rhs.push_back(Expression(ps[j]) - substitute(differentiate(model.lagrangian, vs[j]), at_zero));
  }
  std::map<Symbol, Expression> inv;
  const std::size_t k = vs.size();
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<Expression> terms;
    for (std::size_t j = 0; j < k; ++j) {
      // adj(H)_ij = (-1)^{i+j} det(H without row j, column i)
      ExpressionMatrix minor;
      for (std::size_t r = 0; r < k; ++r) {
        if (r == j) continue;
        std::vector<Expression> row;
        for (std::size_t c = 0; c < k; ++c)
          if (c != i) row.push_back(h[r][c]);
        minor.push_back(std::move(row));
      }
      Expression cof = determinant(minor);
      if ((i + j) % 2 == 1) cof = -cof;
      if (!cof.is_zero()) terms.push_back(cof * rhs[j]);
    }
    Expression vi = add(std::move(terms)) / det;
    if (vi.size() < 4000) vi = expand(vi);
    inv.emplace(vs[i], vi);
  }
  return inv;
}

struct RadialParts {
  Expression d, c, gamma, delta;
};

// L = d + c * (gamma + delta * sum_{A,nu} (v^A_nu)^2)^(1/2) with d, c, gamma,
// delta free of v.
std::optional<RadialParts> radial_parts(const FieldModel& model) {
  const Expression& L = model.lagrangian;
  std::vector<Expression> free_terms;
  std::vector<Expression> v_terms;
  if (L.kind() == NodeKind::add) {
    for (const auto& t : L.args()) (has_velocity(t) ? v_terms : free_terms).push_back(t);
  } else {
    (has_velocity(L) ? v_terms : free_terms).push_back(L);
  }
  if (v_terms.size() != 1) return std::nullopt;
  const Expression& t = v_terms.front();
  std::optional<Expression> root;
  std::vector<Expression> coeff;
  auto is_root = [](const Expression& e) {
    return e.kind() == NodeKind::pow && e.exponent() == Rational(1, 2) && has_velocity(e.args()[0]);
  };
  if (is_root(t)) {
    root = t;
  } else if (t.kind() == NodeKind::mul) {
    for (const auto& f : t.args()) {
      if (is_root(f) && !root) {
        root = f;
      } else if (has_velocity(f)) {
        return std::nullopt;
      } else {
        coeff.push_back(f);
      }
    }
  }
  if (!root) return std::nullopt;
  const Expression q = expand(root->args()[0]);
  if (q.kind() != NodeKind::add) return std::nullopt;
  std::vector<Expression> gamma_terms;
  std::map<Symbol, Expression> square_coeff;
  for (const auto& term : q.args()) {
    if (!has_velocity(term)) {
      gamma_terms.push_back(term);
      continue;
    }
    std::optional<Symbol> v;
    std::vector<Expression> rest;
    auto take = [&](const Expression& f) {
      if (f.kind() == NodeKind::pow && f.exponent() == Rational(2) && f.args()[0].kind() == NodeKind::symbol &&
          f.args()[0].symbol().kind == SymbolKind::velocity && !v) {
        v = f.args()[0].symbol();
        return true;
      }
      if (has_velocity(f)) return false;
      rest.push_back(f);
      return true;
    };
    if (term.kind() == NodeKind::mul) {
      for (const auto& f : term.args())
        if (!take(f)) return std::nullopt;
    } else if (!take(term)) {
      return std::nullopt;
    }
    if (!v || square_coeff.count(*v)) return std::nullopt;
    square_coeff.emplace(*v, mul(std::move(rest)));
  }
  const auto vs = velocity_symbols(model.m, model.n);
  if (square_coeff.size() != vs.size()) return std::nullopt;
  const Expression delta = square_coeff.begin()->second;
  for (const auto& [s, c] : square_coeff)
    if (!(c == delta)) return std::nullopt;
  return RadialParts{add(std::move(free_terms)), mul(std::move(coeff)), add(std::move(gamma_terms)), delta};
}

}  // namespace

struct LegendreMaps::Compiled {
  std::vector<Symbol> jet_slots;
  std::vector<Symbol> restricted_slots;
  CompiledExpression L;
  std::vector<CompiledExpression> L_v;
  std::vector<CompiledExpression> L_y;
  std::vector<std::vector<CompiledExpression>> hess;
  std::vector<CompiledExpression> inverse;
};

LegendreMaps::LegendreMaps(const FieldModel& model) : model_(model) {
  const int m = model.m;
  const int n = model.n;
  const Expression& L = model.lagrangian;
  const auto vs = velocity_symbols(m, n);
  for (const auto& x : base_symbols(m)) restricted_.emplace(x, Expression(x));
  for (const auto& y : field_symbols(n)) restricted_.emplace(y, Expression(y));
  std::vector<Expression> lv;
  std::vector<Expression> energy{L};
  for (int a = 1; a <= n; ++a) {
    for (int nu = 1; nu <= m; ++nu) {
      const Expression d = differentiate(L, Symbol::v(a, nu));
      lv.push_back(d);
      restricted_.emplace(Symbol::p(a, nu), d);
      energy.push_back(-(Expression(Symbol::v(a, nu)) * d));
    }
  }
  extended_ = restricted_;
  extended_.emplace(Symbol::affine(), add(std::move(energy)));

  auto c = std::make_shared<Compiled>();
  c->jet_slots = model.space(SpaceTag::jet)->coordinates();
  c->restricted_slots = model.space(SpaceTag::restricted_momentum)->coordinates();
  c->L = CompiledExpression(L, c->jet_slots);
  for (const auto& d : lv) c->L_v.emplace_back(d, c->jet_slots);
  for (const auto& y : field_symbols(n)) c->L_y.emplace_back(differentiate(L, y), c->jet_slots);
  for (std::size_t i = 0; i < lv.size(); ++i) {
    std::vector<CompiledExpression> row;
    for (const auto& v : vs) row.emplace_back(differentiate(lv[i], v), c->jet_slots);
    c->hess.push_back(std::move(row));
  }
  compiled_ = c;

  // symbolic inverse candidates
  std::optional<std::map<Symbol, Expression>> cand;
  InverseKind kind = InverseKind::numeric;
  std::optional<Expression> closed_h;
  if (auto lin = linear_inverse(model)) {
    cand = std::move(lin);
    kind = InverseKind::linear;
  } else if (auto rad = radial_parts(model)) {
    // p = c delta v / sqrt(Q), so with s = |p|^2 and k = c^2 delta:
    // v = p sqrt(gamma) / (c delta) (1 - s/k)^(-1/2)
    // h = -d - c sqrt(gamma) (1 - s/k)^(1/2)
    std::vector<Expression> sq;
    for (const auto& p : momentum_symbols(m, n)) sq.push_back(pow(Expression(p), Rational(2)));
    const Expression k = rad->c * rad->c * rad->delta;
    const Expression u = Expression(1) - add(std::move(sq)) / k;
    const Expression scale = sqrt(rad->gamma) / (rad->c * rad->delta) * pow(u, Rational(-1, 2));
    std::map<Symbol, Expression> inv;
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu) inv.emplace(Symbol::v(a, nu), Expression(Symbol::p(a, nu)) * scale);
    cand = std::move(inv);
    kind = InverseKind::radial;
    closed_h = -rad->d - rad->c * sqrt(rad->gamma) * sqrt(u);
  }
  if (!cand) return;

  // verify dL/dv o inverse = p at random points
  std::vector<CompiledExpression> inv_c;
  for (const auto& v : vs) inv_c.emplace_back(cand->at(v), c->restricted_slots);
  std::mt19937_64 rng(20091106);
  std::uniform_real_distribution<double> base(-0.5, 0.5);
  std::uniform_real_distribution<double> mom(-0.3, 0.3);
  const std::size_t nb = static_cast<std::size_t>(m + n);
  int ok = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> z(c->restricted_slots.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = i < nb ? base(rng) : mom(rng);
    std::vector<double> jet(z);
    try {
      for (std::size_t i = 0; i < vs.size(); ++i) jet[nb + i] = inv_c[i](z);
      for (std::size_t i = 0; i < vs.size(); ++i) {
        const double p = z[nb + i];
        if (std::fabs(c->L_v[i](jet) - p) > 1e-9 * (1.0 + std::fabs(p))) return;
      }
      ++ok;
    } catch (const DomainError&) {
    }
  }
  if (ok < 5) return;
  c->inverse = std::move(inv_c);
  inverse_ = std::move(cand);
  kind_ = kind;
  closed_h_ = std::move(closed_h);
}

double LegendreMaps::lagrangian_at(std::span<const double> jet) const { return compiled_->L(jet); }

std::vector<double> LegendreMaps::lagrangian_dy(std::span<const double> jet) const {
  std::vector<double> out;
  for (const auto& f : compiled_->L_y) out.push_back(f(jet));
  return out;
}

std::vector<double> LegendreMaps::invert_slots(std::span<const double> z) const {
  if (compiled_->inverse.empty()) return invert_numeric_slots(z);
  std::vector<double> v;
  for (const auto& f : compiled_->inverse) v.push_back(f(z));
  return v;
}

std::vector<double> LegendreMaps::invert_numeric_slots(std::span<const double> z) const {
  const auto& c = *compiled_;
  const std::size_t nb = static_cast<std::size_t>(model_.m + model_.n);
  const std::size_t k = c.L_v.size();
  if (z.size() != nb + k) throw ModelError("slot vector does not match the restricted momentum space");
  Eigen::VectorXd p(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) p(static_cast<Eigen::Index>(i)) = z[nb + i];
  std::vector<double> jet(z.begin(), z.end());
  auto residual = [&](const std::vector<double>& j, Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) r(static_cast<Eigen::Index>(i)) = c.L_v[i](j) - p(static_cast<Eigen::Index>(i));
    return r.lpNorm<Eigen::Infinity>();
  };
  Eigen::VectorXd r;
  double norm = residual(jet, r);
  const double tol = 1e-12 * (1.0 + p.lpNorm<Eigen::Infinity>());
  for (int it = 0; it < 50 && norm > tol; ++it) {
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.hess[i][j](jet);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw RegularityError("Legendre map not invertible here (singular velocity Hessian)");
    const Eigen::VectorXd step = lu.solve(r);
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 30; ++half, t *= 0.5) {
      std::vector<double> trial = jet;
      for (std::size_t i = 0; i < k; ++i) trial[nb + i] -= t * step(static_cast<Eigen::Index>(i));
      Eigen::VectorXd rt;
      double nt;
      try {
        nt = residual(trial, rt);
      } catch (const DomainError&) {
        continue;
      }
      if (nt < norm || nt <= tol) {
        jet = std::move(trial);
        r = rt;
        norm = nt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (!(norm <= tol)) {
    std::ostringstream os;
    os << "Legendre map not invertible here: Newton stopped with residual " << norm;
    throw RegularityError(os.str());
  }
  return {jet.begin() + static_cast<std::ptrdiff_t>(nb), jet.end()};
}

namespace {

std::vector<double> restricted_slots(const SpacePtr& sp, const Assignment& point) {
  std::vector<double> z;
  for (const auto& s : sp->coordinates()) {
    auto it = point.find(s);
    if (it == point.end()) throw SymbolError("point does not assign " + s.name());
    z.push_back(it->second);
  }
  return z;
}

}  // namespace

std::vector<double> LegendreMaps::invert(const Assignment& point) const {
  return invert_slots(restricted_slots(model_.space(SpaceTag::restricted_momentum), point));
}

std::vector<double> LegendreMaps::invert_numeric(const Assignment& point) const {
  return invert_numeric_slots(restricted_slots(model_.space(SpaceTag::restricted_momentum), point));
}

LegendreMaps legendre(const FieldModel& model) { return LegendreMaps(model); }

// ---------------------------------------------------------------------------

struct HamiltonianSystem::Compiled {
  CompiledExpression h;
  std::vector<CompiledExpression> h_p;
  std::vector<CompiledExpression> h_y;
  std::vector<std::vector<CompiledExpression>> hess;  // over (y, p)
};

HamiltonianSystem::HamiltonianSystem(int m, int n, HamiltonianOrigin origin)
    : m_(m), n_(n), origin_(origin), space_(CoordinateSpace::make(SpaceTag::restricted_momentum, m, n)) {}

void HamiltonianSystem::finish_symbolic(const Expression& h) {
  h_ = h;
  const SpacePtr& sp = space_;
  CoordinateForm theta(sp, m_);
  for (int a = 1; a <= n_; ++a)
    for (int nu = 1; nu <= m_; ++nu) {
      theta += wedge(CoordinateForm::differential(sp, Symbol::y(a)),
                     Expression(Symbol::p(a, nu)) * hypersurface_form(sp, nu));
    }
  theta -= h * volume_form(sp);
  omega_ = -exterior_derivative(theta);
  theta_ = std::move(theta);

  auto c = std::make_shared<Compiled>();
  const auto& slots = sp->coordinates();
  c->h = CompiledExpression(h, slots);
  std::vector<Symbol> yp;
  for (const auto& y : field_symbols(n_)) {
    yp.push_back(y);
    c->h_y.emplace_back(differentiate(h, y), slots);
  }
  for (const auto& p : momentum_symbols(m_, n_)) {
    yp.push_back(p);
    c->h_p.emplace_back(differentiate(h, p), slots);
  }
  for (const auto& s : yp) {
    const Expression d = differentiate(h, s);
    std::vector<CompiledExpression> row;
    for (const auto& t : yp) row.emplace_back(differentiate(d, t), slots);
    c->hess.push_back(std::move(row));
  }
  compiled_ = c;
}

HamiltonianSystem HamiltonianSystem::from_hamiltonian(int m, int n, const Expression& h) {
  if (m < 1 || n < 1) throw ModelError("dimensions must be at least 1");
  HamiltonianSystem hs(m, n, HamiltonianOrigin::user_supplied);
  for (const auto& s : h.free_symbols()) {
    if (!hs.space_->contains(s)) {
      throw SymbolError("Hamiltonian uses " + s.name() + ", which is not a coordinate of the restricted momentum space");
    }
  }
  hs.finish_symbolic(h);
  return hs;
}

HamiltonianSystem hamiltonian_system(const LegendreMaps& maps) {
  const FieldModel& model = maps.model();
  HamiltonianSystem hs(model.m, model.n, HamiltonianOrigin::derived_from_lagrangian);
  hs.legendre_ = maps;
  if (maps.inverse()) {
    if (maps.closed_form_h()) {
      hs.finish_symbolic(*maps.closed_form_h());
    } else {
      const auto& inv = *maps.inverse();
      std::vector<Expression> terms{-substitute(model.lagrangian, inv)};
      for (const auto& [v, e] : inv) terms.push_back(Expression(Symbol::p(v.field, v.dir)) * e);
      Expression h = add(std::move(terms));
      if (h.size() < 4000) h = expand(h);
      hs.finish_symbolic(h);
    }
    return hs;
  }
  Expression det = determinant(velocity_hessian(model));
  if (det.size() < 4000) det = expand(det);
  if (det.is_zero()) {
    throw RegularityError("Lagrangian is not hyper-regular: the velocity Hessian determinant is identically 0");
  }
  return hs;
}

HamiltonianSystem hamiltonian_system(const FieldModel& model) { return hamiltonian_system(legendre(model)); }

std::optional<CoordinateForm> HamiltonianSystem::omega_display() const {
  if (!h_) return std::nullopt;
  const SpacePtr& sp = space_;
  CoordinateForm out = wedge(differential(sp, *h_), volume_form(sp));
  for (int a = 1; a <= n_; ++a)
    for (int nu = 1; nu <= m_; ++nu) {
      out -= wedge(wedge(CoordinateForm::differential(sp, Symbol::p(a, nu)), CoordinateForm::differential(sp, Symbol::y(a))),
                   hypersurface_form(sp, nu));
    }
  return out;
}

double HamiltonianSystem::value(std::span<const double> z) const {
  if (compiled_) return compiled_->h(z);
  const auto v = legendre_->invert_slots(z);
  const std::size_t nb = static_cast<std::size_t>(m_ + n_);
  std::vector<double> jet(z.begin(), z.end());
  double pv = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    jet[nb + i] = v[i];
    pv += z[nb + i] * v[i];
  }
  return pv - legendre_->lagrangian_at(jet);
}

std::vector<double> HamiltonianSystem::grad_p(std::span<const double> z) const {
  if (compiled_) {
    std::vector<double> out;
    for (const auto& f : compiled_->h_p) out.push_back(f(z));
    return out;
  }
  return legendre_->invert_slots(z);
}

std::vector<double> HamiltonianSystem::grad_y(std::span<const double> z) const {
  if (compiled_) {
    std::vector<double> out;
    for (const auto& f : compiled_->h_y) out.push_back(f(z));
    return out;
  }
  const auto v = legendre_->invert_slots(z);
  const std::size_t nb = static_cast<std::size_t>(m_ + n_);
  std::vector<double> jet(z.begin(), z.end());
  for (std::size_t i = 0; i < v.size(); ++i) jet[nb + i] = v[i];
  auto ly = legendre_->lagrangian_dy(jet);
  for (auto& d : ly) d = -d;
  return ly;
}

NumericForm HamiltonianSystem::omega_at(std::span<const double> z) const {
  const SpacePtr& sp = space_;
  const auto hy = grad_y(z);
  const auto hp = grad_p(z);
  NumericForm dh(sp, 1);
  for (int a = 1; a <= n_; ++a) dh.add_term({static_cast<std::uint16_t>(sp->require(Symbol::y(a)))}, hy[a - 1]);
  for (int a = 1; a <= n_; ++a)
    for (int nu = 1; nu <= m_; ++nu) {
      dh.add_term({static_cast<std::uint16_t>(sp->require(Symbol::p(a, nu)))}, hp[static_cast<std::size_t>((a - 1) * m_ + nu - 1)]);
    }
  NumericForm out = wedge(dh, volume_form<double>(sp));
  for (int a = 1; a <= n_; ++a)
    for (int nu = 1; nu <= m_; ++nu) {
      out -= wedge(wedge(NumericForm::differential(sp, Symbol::p(a, nu)), NumericForm::differential(sp, Symbol::y(a))),
                   hypersurface_form<double>(sp, nu));
    }
  return out;
}

std::vector<std::vector<double>> HamiltonianSystem::hessian_yp(std::span<const double> z) const {
  const std::size_t nb = static_cast<std::size_t>(m_);
  const std::size_t k = static_cast<std::size_t>(n_ + n_ * m_);
  std::vector<std::vector<double>> out(k, std::vector<double>(k, 0.0));
  if (compiled_) {
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) out[i][j] = compiled_->hess[i][j](z);
    return out;
  }
  auto grad = [&](std::span<const double> w) {
    auto g = grad_y(w);
    const auto gp = grad_p(w);
    g.insert(g.end(), gp.begin(), gp.end());
    return g;
  };
  const double step = 1e-6;
  std::vector<double> w(z.begin(), z.end());
  for (std::size_t j = 0; j < k; ++j) {
    const double orig = w[nb + j];
    w[nb + j] = orig + step;
    const auto gplus = grad(w);
    w[nb + j] = orig - step;
    const auto gminus = grad(w);
    w[nb + j] = orig;
    for (std::size_t i = 0; i < k; ++i) out[i][j] = (gplus[i] - gminus[i]) / (2.0 * step);
  }
  return out;
}

std::vector<double> HamiltonianSystem::slots(const Assignment& point) const { return restricted_slots(space_, point); }

// ---------------------------------------------------------------------------

std::string location_string(const SectionGrid& g, std::size_t node) {
  std::ostringstream os;
  const auto idx = g.multi_index(node);
  const auto x = g.position(node);
  os << "grid node (";
  for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? "," : "") << idx[i];
  os << ") at x = (";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

ResidualNorms residual_norms(const SectionGrid& g, const std::vector<std::vector<double>>& comps) {
  ResidualNorms r;
  double cell = 1.0;
  for (int a = 0; a < g.base_dim(); ++a) cell *= g.spacing(a);
  double sum = 0.0;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    for (std::size_t k = 0; k < comps[c].size(); ++k) {
      const double v = std::fabs(comps[c][k]);
      sum += v * v;
      if (v > r.sup) {
        r.sup = v;
        r.sup_node = k;
        r.sup_component = static_cast<int>(c);
      }
    }
  }
  r.l2 = std::sqrt(sum * cell);
  return r;
}

HDWResidual hdw_residual(const HamiltonianSystem& hs, const SectionGrid& psi) {
  const int m = hs.base_dim();
  const int n = hs.fiber_dim();
  if (psi.base_dim() != m || psi.fiber_dim() != n) throw ModelError("grid does not match the Hamiltonian system");
  if (!psi.has_momenta()) throw ModelError("HDW residual needs momenta on the grid");
  const std::size_t count = psi.node_count();
  HDWResidual out;
  out.r1.assign(static_cast<std::size_t>(n * m), std::vector<double>(count, 0.0));
  out.r2.assign(static_cast<std::size_t>(n), std::vector<double>(count, 0.0));
  std::vector<double> z;
  for (std::size_t k = 0; k < count; ++k) {
    z = psi.position(k);
    for (int a = 1; a <= n; ++a) z.push_back(psi.y(a)[k]);
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu) z.push_back(psi.p(a, nu)[k]);
    std::vector<double> hp;
    std::vector<double> hy;
    try {
      hp = hs.grad_p(z);
      hy = hs.grad_y(z);
    } catch (const DomainError& e) {
      throw DomainError(std::string("Hamiltonian not evaluable at ") + location_string(psi, k), e.subexpression());
    } catch (const RegularityError& e) {
      throw RegularityError(std::string(e.what()) + " at " + location_string(psi, k));
    }
    const bool interior = !psi.is_boundary(k);
    for (int a = 1; a <= n; ++a) {
      double div = 0.0;
      for (int nu = 1; nu <= m; ++nu) {
        const std::size_t c = static_cast<std::size_t>((a - 1) * m + nu - 1);
        out.r1[c][k] = grid_derivative(psi, psi.y(a), k, nu - 1) - hp[c];
        if (interior) div += grid_derivative(psi, psi.p(a, nu), k, nu - 1);
      }
      if (interior) out.r2[static_cast<std::size_t>(a - 1)][k] = div + hy[static_cast<std::size_t>(a - 1)];
    }
  }
  out.r1_norms = residual_norms(psi, out.r1);
  out.r2_norms = residual_norms(psi, out.r2);
  return out;
}

HDWMultivector hdw_multivector(const HamiltonianSystem& hs, const Assignment& point) {
  const int m = hs.base_dim();
  const int n = hs.fiber_dim();
  const auto z = hs.slots(point);
  HDWMultivector out;
  out.F = hs.grad_p(z);
  const auto hy = hs.grad_y(z);
  out.G.assign(static_cast<std::size_t>(n * m * m), 0.0);
  for (int a = 1; a <= n; ++a)
    for (int nu = 1; nu <= m; ++nu) {
      out.G[static_cast<std::size_t>(((a - 1) * m + (nu - 1)) * m + (nu - 1))] = -hy[static_cast<std::size_t>(a - 1)] / m;
    }
  const SpacePtr& sp = hs.space();
  for (int nu = 1; nu <= m; ++nu) {
    NumericVectorField x(sp);
    x.set(Symbol::x(nu), 1.0);
    for (int a = 1; a <= n; ++a) {
      x.set(Symbol::y(a), out.F[static_cast<std::size_t>((a - 1) * m + (nu - 1))]);
      for (int rho = 1; rho <= m; ++rho) {
        x.set(Symbol::p(a, rho), out.G[static_cast<std::size_t>(((a - 1) * m + (rho - 1)) * m + (nu - 1))]);
      }
    }
    out.factors.push_back(std::move(x));
  }
  return out;
}

}  // namespace msym
