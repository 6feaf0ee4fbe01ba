#include "msym/lagrangian.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace msym {

PoincareCartanForms poincare_cartan(const FieldModel& model) {
  const SpacePtr sp = model.space(SpaceTag::jet);
  const int m = model.m;
  const Expression& L = model.lagrangian;
  const CoordinateForm vol = volume_form(sp);

  std::vector<Expression> energy_terms;
  CoordinateForm theta(sp, m);
  for (int a = 1; a <= model.n; ++a) {
    for (int nu = 1; nu <= m; ++nu) {
      const Symbol v = Symbol::v(a, nu);
      const Expression dl = differentiate(L, v);
      if (dl.is_zero()) continue;
      energy_terms.push_back(dl * Expression(v));
      theta += wedge(CoordinateForm::differential(sp, Symbol::y(a)), dl * hypersurface_form(sp, nu));
    }
  }
  energy_terms.push_back(-L);
  theta -= add(std::move(energy_terms)) * vol;
  CoordinateForm omega = -exterior_derivative(theta);
  return {std::move(theta), std::move(omega)};
}

CoordinateForm poincare_cartan_omega_display(const FieldModel& model) {
  const SpacePtr sp = model.space(SpaceTag::jet);
  const int m = model.m;
  const int n = model.n;
  const Expression& L = model.lagrangian;
  const CoordinateForm vol = volume_form(sp);
  CoordinateForm out(sp, m + 1);
  auto d = [&](const Symbol& s) { return CoordinateForm::differential(sp, s); };

  for (int a = 1; a <= n; ++a) {
    for (int al = 1; al <= m; ++al) {
      const Symbol va = Symbol::v(a, al);
      const Expression la = differentiate(L, va);
      const CoordinateForm dy_hyp = wedge(d(Symbol::y(a)), hypersurface_form(sp, al));
      for (int b = 1; b <= n; ++b) {
        // -L_{v^B_nu v^A_alpha} dv^B_nu ^ dy^A ^ d^{m-1}x_alpha
        // +L_{v^B_nu v^A_alpha} v^A_alpha dv^B_nu ^ d^m x
        for (int nu = 1; nu <= m; ++nu) {
          const Symbol vb = Symbol::v(b, nu);
          const Expression h = differentiate(la, vb);
          if (h.is_zero()) continue;
          out -= h * wedge(d(vb), dy_hyp);
          out += (h * Expression(va)) * wedge(d(vb), vol);
        }
        // -L_{y^B v^A_alpha} dy^B ^ dy^A ^ d^{m-1}x_alpha
        const Expression hy = differentiate(la, Symbol::y(b));
        if (!hy.is_zero()) out -= hy * wedge(d(Symbol::y(b)), dy_hyp);
      }
    }
  }
  // (L_{y^B v^A_alpha} v^A_alpha - L_{y^B} + L_{x^alpha v^B_alpha}) dy^B ^ d^m x
  for (int b = 1; b <= n; ++b) {
    const Symbol yb = Symbol::y(b);
    std::vector<Expression> c{-differentiate(L, yb)};
    for (int a = 1; a <= n; ++a)
      for (int al = 1; al <= m; ++al) {
        c.push_back(differentiate(differentiate(L, Symbol::v(a, al)), yb) * Expression(Symbol::v(a, al)));
      }
    for (int al = 1; al <= m; ++al) c.push_back(differentiate(differentiate(L, Symbol::v(b, al)), Symbol::x(al)));
    out += add(std::move(c)) * wedge(d(yb), vol);
  }
  return out;
}

ExpressionMatrix velocity_hessian(const FieldModel& model) {
  const auto vs = velocity_symbols(model.m, model.n);
  ExpressionMatrix h(vs.size(), std::vector<Expression>(vs.size()));
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const Expression di = differentiate(model.lagrangian, vs[i]);
    for (std::size_t j = i; j < vs.size(); ++j) {
      h[i][j] = differentiate(di, vs[j]);
      h[j][i] = h[i][j];
    }
  }
  return h;
}

Expression determinant(const ExpressionMatrix& a) {
  const std::size_t n = a.size();
  if (n == 0) return Expression(1);
  if (n > 20) throw ModelError("symbolic determinant limited to 20x20");
  // det of the trailing rows [row, n) restricted to the columns in `mask`
  std::unordered_map<std::uint32_t, Expression> memo;
  std::function<Expression(std::size_t, std::uint32_t)> rec = [&](std::size_t row, std::uint32_t mask) -> Expression {
    if (row == n) return Expression(1);
    auto it = memo.find(mask);
    if (it != memo.end()) return it->second;
    std::vector<Expression> terms;
    int sign = 1;
    for (std::size_t c = 0; c < n; ++c) {
      if (!(mask & (1u << c))) continue;
      if (!a[row][c].is_zero()) {
        Expression minor = rec(row + 1, mask & ~(1u << c));
        if (!minor.is_zero()) {
          Expression t = a[row][c] * minor;
          terms.push_back(sign > 0 ? t : -t);
        }
      }
      sign = -sign;
    }
    Expression r = add(std::move(terms));
    memo.emplace(mask, r);
    return r;
  };
  return rec(0, (1u << n) - 1u);
}

bool RegularityReport::regular_on_samples() const {
  if (identically_singular) return false;
  for (const auto& s : samples) {
    if (!s.regular) return false;
  }
  return true;
}

RegularityReport regularity_certificate(const FieldModel& model, std::span<const Assignment> points) {
  RegularityReport rep;
  rep.hessian = velocity_hessian(model);
  rep.determinant = determinant(rep.hessian);
  if (!rep.determinant.is_zero() && rep.determinant.size() < 4000) {
    if (expand(rep.determinant).is_zero()) rep.determinant = Expression(0);
  }
  rep.identically_singular = rep.determinant.is_zero();
  for (const auto& p : points) {
    RegularitySample s;
    s.point = p;
    try {
      const double d = evaluate(rep.determinant, p);
      s.determinant = d;
      s.regular = std::fabs(d) > 1e-12;
    } catch (const Error& e) {
      s.error = e.what();
    }
    rep.samples.push_back(std::move(s));
  }
  return rep;
}

std::map<Symbol, Expression> velocity_to_jet(int m, int n) {
  std::map<Symbol, Expression> out;
  for (int a = 1; a <= n; ++a)
    for (int nu = 1; nu <= m; ++nu) out.emplace(Symbol::v(a, nu), Expression(Symbol::dy(a, nu)));
  return out;
}

ELSystem el_system(const FieldModel& model) {
  const int m = model.m;
  const int n = model.n;
  const Expression& L = model.lagrangian;
  const auto to_jet = velocity_to_jet(m, n);
  ELSystem sys;
  sys.m = m;
  sys.n = n;
  for (int a = 1; a <= n; ++a) {
    std::vector<Expression> terms{differentiate(L, Symbol::y(a))};
    for (int mu = 1; mu <= m; ++mu) {
      const Expression lv = differentiate(L, Symbol::v(a, mu));
      if (lv.is_zero()) continue;
      terms.push_back(-differentiate(lv, Symbol::x(mu)));
      for (int b = 1; b <= n; ++b) {
        const Expression ly = differentiate(lv, Symbol::y(b));
        if (!ly.is_zero()) terms.push_back(-(ly * Expression(Symbol::v(b, mu))));
        for (int nu = 1; nu <= m; ++nu) {
          const Expression lvv = differentiate(lv, Symbol::v(b, nu));
          if (!lvv.is_zero()) terms.push_back(-(lvv * Expression(Symbol::ddy(b, nu, mu))));
        }
      }
    }
    sys.residuals.push_back(substitute(add(std::move(terms)), to_jet));
  }
  return sys;
}

std::string ELSystem::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    os << "EL[" << (i + 1) << "]: " << residuals[i].to_string() << " = 0\n";
  }
  return os.str();
}

namespace {

struct GSystem {
  Eigen::MatrixXd a;  // n x (symmetric unknowns)
  Eigen::VectorXd rhs;
  std::vector<std::array<int, 3>> unknowns;  // (B, nu, mu) with nu <= mu
  double hessian_det = 0.0;
};

// Rows of: sum_{B,nu,mu} L_{v^B_nu v^A_mu} G^B_{nu mu}
//   = L_{y^A} - L_{x^mu v^A_mu} - L_{y^B v^A_mu} v^B_mu
GSystem g_system(const FieldModel& model, const Assignment& point) {
  const int m = model.m;
  const int n = model.n;
  const Expression& L = model.lagrangian;
  GSystem g;
  for (int b = 1; b <= n; ++b)
    for (int nu = 1; nu <= m; ++nu)
      for (int mu = nu; mu <= m; ++mu) g.unknowns.push_back({b, nu, mu});
  g.a = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(g.unknowns.size()));
  g.rhs = Eigen::VectorXd::Zero(n);

  const auto vs = velocity_symbols(m, n);
  Eigen::MatrixXd hess(vs.size(), vs.size());
  std::vector<Expression> lv(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) lv[i] = differentiate(L, vs[i]);
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = 0; j < vs.size(); ++j) hess(i, j) = evaluate(differentiate(lv[i], vs[j]), point);
  g.hessian_det = vs.empty() ? 1.0 : hess.determinant();

  auto vi = [m](int a, int nu) { return static_cast<Eigen::Index>((a - 1) * m + (nu - 1)); };
  for (int a = 1; a <= n; ++a) {
    double r = evaluate(differentiate(L, Symbol::y(a)), point);
    for (int mu = 1; mu <= m; ++mu) {
      const Expression& l = lv[static_cast<std::size_t>(vi(a, mu))];
      r -= evaluate(differentiate(l, Symbol::x(mu)), point);
      for (int b = 1; b <= n; ++b) {
        r -= evaluate(differentiate(l, Symbol::y(b)), point) * point.at(Symbol::v(b, mu));
      }
    }
    g.rhs(a - 1) = r;
    for (std::size_t k = 0; k < g.unknowns.size(); ++k) {
      const auto [b, nu, mu] = g.unknowns[k];
      double c = hess(vi(b, nu), vi(a, mu));
      if (nu != mu) c += hess(vi(b, mu), vi(a, nu));
      g.a(a - 1, static_cast<Eigen::Index>(k)) = c;
    }
  }
  return g;
}

ELMultivector assemble(const FieldModel& model, const Assignment& point, std::vector<double> G, const GSystem& sys) {
  const int m = model.m;
  const int n = model.n;
  const SpacePtr sp = model.space(SpaceTag::jet);
  ELMultivector out;
  out.G = std::move(G);
  for (int a = 1; a <= n; ++a)
    for (int nu = 1; nu <= m; ++nu) out.F.push_back(point.at(Symbol::v(a, nu)));
  for (int nu = 1; nu <= m; ++nu) {
    NumericVectorField x(sp);
    x.set(Symbol::x(nu), 1.0);
    for (int a = 1; a <= n; ++a) {
      x.set(Symbol::y(a), out.F[static_cast<std::size_t>((a - 1) * m + (nu - 1))]);
      for (int rho = 1; rho <= m; ++rho) {
        x.set(Symbol::v(a, rho), out.G[static_cast<std::size_t>(((a - 1) * m + (nu - 1)) * m + (rho - 1))]);
      }
    }
    out.factors.push_back(std::move(x));
  }
  // residual of the G-equations with the full (not necessarily symmetric) G
  for (int a = 1; a <= n; ++a) {
    double lhs = 0.0;
    for (std::size_t k = 0; k < sys.unknowns.size(); ++k) {
      const auto [b, nu, mu] = sys.unknowns[k];
      const auto gi = [&](int p, int q) { return out.G[static_cast<std::size_t>(((b - 1) * m + (p - 1)) * m + (q - 1))]; };
      const double coeff = sys.a(a - 1, static_cast<Eigen::Index>(k));
      // coeff already merges (nu,mu) and (mu,nu); use the average for asymmetric G
      lhs += coeff * (nu == mu ? gi(nu, mu) : 0.5 * (gi(nu, mu) + gi(mu, nu)));
    }
    out.constraint_residual.push_back(lhs - sys.rhs(a - 1));
  }
  return out;
}

}  // namespace

ELMultivector el_multivector(const FieldModel& model, const Assignment& point) {
  const GSystem sys = g_system(model, point);
  const int m = model.m;
  std::vector<double> G(static_cast<std::size_t>(model.n * m * m), 0.0);
  // every G solves equations that vanish identically (e.g. constant L)
  if (sys.a.isZero(0.0) && sys.rhs.isZero(0.0)) return assemble(model, point, std::move(G), sys);
  if (std::fabs(sys.hessian_det) <= 1e-12) {
    throw RegularityError(
        "velocity Hessian is singular at this point; Euler-Lagrange multivector fields then exist only on a constraint "
        "submanifold, and the constraint algorithm is not supported");
  }
  const Eigen::VectorXd g = sys.a.completeOrthogonalDecomposition().solve(sys.rhs);
  if ((sys.a * g - sys.rhs).norm() > 1e-8 * (1.0 + sys.rhs.norm())) {
    throw RegularityError("inconsistent G-equations at a regular point");
  }
  for (std::size_t k = 0; k < sys.unknowns.size(); ++k) {
    const auto [b, nu, mu] = sys.unknowns[k];
    G[static_cast<std::size_t>(((b - 1) * m + (nu - 1)) * m + (mu - 1))] = g(static_cast<Eigen::Index>(k));
    G[static_cast<std::size_t>(((b - 1) * m + (mu - 1)) * m + (nu - 1))] = g(static_cast<Eigen::Index>(k));
  }
  return assemble(model, point, std::move(G), sys);
}

ELMultivector el_multivector_with(const FieldModel& model, const Assignment& point, std::vector<double> G) {
  if (G.size() != static_cast<std::size_t>(model.n * model.m * model.m)) throw ModelError("G has the wrong size");
  return assemble(model, point, std::move(G), g_system(model, point));
}

NumericConnection to_connection(const std::vector<NumericVectorField>& factors) { return NumericConnection(factors); }

double action(const FieldModel& model, const SectionGrid& phi) {
  if (phi.base_dim() != model.m || phi.fiber_dim() != model.n) throw ModelError("grid does not match the model");
  const SpacePtr sp = model.space(SpaceTag::jet);
  const CompiledExpression L(model.lagrangian, sp->coordinates());
  const int m = model.m;
  const int n = model.n;
  std::vector<double> slots(sp->dim());
  double total = 0.0;
  for (std::size_t k = 0; k < phi.node_count(); ++k) {
    const auto idx = phi.multi_index(k);
    double w = 1.0;
    for (int a = 0; a < m; ++a) {
      const bool end = idx[a] == 0 || idx[a] == phi.resolution()[a] - 1;
      w *= end ? 0.5 * phi.spacing(a) : phi.spacing(a);
    }
    const auto x = phi.position(k);
    std::size_t s = 0;
    for (int a = 0; a < m; ++a) slots[s++] = x[a];
    for (int a = 1; a <= n; ++a) slots[s++] = phi.y(a)[k];
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu) slots[s++] = grid_derivative(phi, phi.y(a), k, nu - 1);
    total += w * L(slots);
  }
  return total;
}

}  // namespace msym
