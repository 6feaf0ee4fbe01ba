#include "msym/numerics.hpp"

#include <Eigen/LU>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "msym/errors.hpp"
#include "msym/lagrangian.hpp"
#include "msym/parser.hpp"

namespace msym {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

Assignment base_point(const std::vector<double>& x) {
  Assignment a;
  for (std::size_t i = 0; i < x.size(); ++i) a.emplace(Symbol::x(static_cast<int>(i) + 1), x[i]);
  return a;
}

double sup_of(const Eigen::VectorXd& r) { return r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace

Expression boundary_preset(std::string_view text, int m) {
  const std::string t = trim(text);
  if (t == "scherk") {
    if (m != 2) throw ModelError("the scherk boundary needs base dimension 2");
    return parse("log(cos(x1)) - log(cos(x2))");
  }
  if (t.rfind("plane(", 0) == 0) {
    if (t.back() != ')') throw ModelError("malformed plane(...) boundary");
    std::vector<std::string> args;
    std::string cur;
    for (std::size_t i = 6; i + 1 < t.size(); ++i) {
      if (t[i] == ',') {
        args.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(t[i]);
      }
    }
    args.push_back(cur);
    if (static_cast<int>(args.size()) != m + 1) {
      throw ModelError("plane(...) needs " + std::to_string(m + 1) + " coefficients");
    }
    std::vector<Expression> terms;
    for (int i = 0; i <= m; ++i) {
      const Expression c = parse(args[static_cast<std::size_t>(i)]);
      if (!c.is_constant()) throw ModelError("plane(...) coefficients must be numbers");
      terms.push_back(i < m ? c * Expression(Symbol::x(i + 1)) : c);
    }
    return add(std::move(terms));
  }
  const Expression e = parse(t, SymbolRange{m, 1});
  for (const auto& s : e.free_symbols()) {
    if (s.kind != SymbolKind::base) throw ModelError("boundary expressions may only use base coordinates, found " + s.name());
  }
  return e;
}

void fill_from(SectionGrid& g, const std::vector<Expression>& fields) {
  if (static_cast<int>(fields.size()) != g.fiber_dim()) throw ModelError("need one boundary expression per field");
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    const Assignment pt = base_point(g.position(k));
    for (int a = 1; a <= g.fiber_dim(); ++a) g.y(a)[k] = evaluate(fields[static_cast<std::size_t>(a - 1)], pt);
  }
}

void coons_fill(SectionGrid& g) {
  const int m = g.base_dim();
  if (m > 2) throw ModelError("initial guesses are implemented for base dimension 1 or 2");
  for (int a = 1; a <= g.fiber_dim(); ++a) {
    auto& y = g.y(a);
    if (m == 1) {
      const int n = g.resolution()[0];
      const double y0 = y[0];
      const double y1 = y[static_cast<std::size_t>(n - 1)];
      for (int i = 1; i < n - 1; ++i) {
        const double s = static_cast<double>(i) / (n - 1);
        y[static_cast<std::size_t>(i)] = (1 - s) * y0 + s * y1;
      }
      continue;
    }
    const int n1 = g.resolution()[0];
    const int n2 = g.resolution()[1];
    auto at = [&](int i, int j) { return y[g.node({i, j})]; };
    const double c00 = at(0, 0);
    const double c10 = at(n1 - 1, 0);
    const double c01 = at(0, n2 - 1);
    const double c11 = at(n1 - 1, n2 - 1);
    for (int i = 1; i < n1 - 1; ++i) {
      const double s = static_cast<double>(i) / (n1 - 1);
      for (int j = 1; j < n2 - 1; ++j) {
        const double t = static_cast<double>(j) / (n2 - 1);
        const double v = (1 - s) * at(0, j) + s * at(n1 - 1, j) + (1 - t) * at(i, 0) + t * at(i, n2 - 1) -
                         ((1 - s) * (1 - t) * c00 + s * (1 - t) * c10 + (1 - s) * t * c01 + s * t * c11);
        y[g.node({i, j})] = v;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Euler-Lagrange discretization

namespace {

struct ELDiscretization {
  int m = 0;
  int n = 0;
  std::vector<Symbol> slots;  // x, y, y_nu, y_{nu mu} (nu <= mu)
  std::vector<CompiledExpression> residual;
  // d residual_A / d slot, for the y, y_nu and y_{nu mu} slots
  std::vector<std::vector<std::pair<std::size_t, CompiledExpression>>> partials;

  explicit ELDiscretization(const FieldModel& model) : m(model.m), n(model.n) {
    for (const auto& x : base_symbols(m)) slots.push_back(x);
    for (const auto& y : field_symbols(n)) slots.push_back(y);
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu) slots.push_back(Symbol::dy(a, nu));
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu)
        for (int mu = nu; mu <= m; ++mu) slots.push_back(Symbol::ddy(a, nu, mu));
    const ELSystem sys = el_system(model);
    for (const auto& r : sys.residuals) {
      residual.emplace_back(r, slots);
      std::vector<std::pair<std::size_t, CompiledExpression>> row;
      for (std::size_t s = static_cast<std::size_t>(m); s < slots.size(); ++s) {
        const Expression d = differentiate(r, slots[s]);
        if (!d.is_zero()) row.emplace_back(s, CompiledExpression(d, slots));
      }
      partials.push_back(std::move(row));
    }
  }

  bool identically_zero() const {
    for (const auto& p : partials)
      if (!p.empty()) return false;
    return true;
  }

  // slot values at an interior node
  void fill(const SectionGrid& g, std::size_t k, std::vector<double>& z) const {
    z = g.position(k);
    for (int a = 1; a <= n; ++a) z.push_back(g.y(a)[k]);
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu) z.push_back(grid_derivative(g, g.y(a), k, nu - 1));
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu)
        for (int mu = nu; mu <= m; ++mu) z.push_back(grid_second_derivative(g, g.y(a), k, nu - 1, mu - 1));
  }

  // field index and stencil for a slot at node k
  std::pair<int, Stencil> slot_stencil(const SectionGrid& g, std::size_t k, std::size_t s) const {
    std::size_t off = static_cast<std::size_t>(m);
    if (s < off + static_cast<std::size_t>(n)) return {static_cast<int>(s - off) + 1, Stencil{{k, 1.0}}};
    const Symbol& sym = slots[s];
    if (sym.kind == SymbolKind::jet_first) return {sym.field, derivative_stencil(g, k, sym.dir - 1)};
    return {sym.field, second_derivative_stencil(g, k, sym.dir - 1, sym.dir2 - 1)};
  }
};

std::string iterate_failure(const SectionGrid& g, std::size_t node, const std::string& what) {
  return what + " at " + location_string(g, node);
}

}  // namespace

GridResidual el_grid_residual(const FieldModel& model, const SectionGrid& phi) {
  if (phi.base_dim() != model.m || phi.fiber_dim() != model.n) throw ModelError("grid does not match the model");
  for (int a = 0; a < model.m; ++a) {
    if (phi.resolution()[a] < 3) throw ModelError("grid too small: EL residuals need at least 3 points per axis");
  }
  const ELDiscretization disc(model);
  GridResidual out;
  out.values.assign(static_cast<std::size_t>(model.n), std::vector<double>(phi.node_count(), 0.0));
  std::vector<double> z;
  for (std::size_t k = 0; k < phi.node_count(); ++k) {
    if (phi.is_boundary(k)) continue;
    disc.fill(phi, k, z);
    for (int a = 0; a < model.n; ++a) {
      try {
        out.values[static_cast<std::size_t>(a)][k] = disc.residual[static_cast<std::size_t>(a)](z);
      } catch (const DomainError& e) {
        throw DomainError(iterate_failure(phi, k, "EL residual not evaluable"), e.subexpression());
      }
    }
  }
  out.norms = residual_norms(phi, out.values);
  return out;
}

namespace {

SectionGrid boundary_grid(int m, int n, const Domain& domain, int resolution, const std::vector<Expression>& boundary) {
  if (static_cast<int>(domain.size()) != m) throw ModelError("domain needs one interval per base axis");
  if (resolution < 3) throw ModelError("grid too small: need at least 3 points per axis");
  SectionGrid g(m, n, domain, std::vector<int>(static_cast<std::size_t>(m), resolution));
  if (static_cast<int>(boundary.size()) != n) throw ModelError("need one boundary expression per field");
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (!g.is_boundary(k)) continue;
    const Assignment pt = base_point(g.position(k));
    for (int a = 1; a <= n; ++a) g.y(a)[k] = evaluate(boundary[static_cast<std::size_t>(a - 1)], pt);
  }
  coons_fill(g);
  return g;
}

struct NewtonProblem {
  std::function<Eigen::VectorXd()> residual;          // at the current state
  std::function<Eigen::SparseMatrix<double>()> jacobian;
  std::function<Eigen::VectorXd()> state;
  std::function<void(const Eigen::VectorXd&)> set_state;
};

SolveReport newton(NewtonProblem& pb, const SolveOptions& opt, double cell_volume, const std::string& singular_hint) {
  SolveReport rep;
  Eigen::VectorXd r = pb.residual();
  double norm = sup_of(r);
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (!(norm >= opt.tolerance)) break;
    const Eigen::SparseMatrix<double> J = pb.jacobian();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(J);
    lu.factorize(J);
    if (lu.info() != Eigen::Success) {
      throw RegularityError("singular linearization at Newton iterate " + std::to_string(it) + " (" + singular_hint + ")");
    }
    const Eigen::VectorXd step = lu.solve(-r);
    if (!step.allFinite()) throw RegularityError("singular linearization at Newton iterate " + std::to_string(it));
    const Eigen::VectorXd x0 = pb.state();
    bool accepted = false;
    for (double t = 1.0; t >= std::ldexp(1.0, -20); t *= 0.5) {
      pb.set_state(x0 + t * step);
      Eigen::VectorXd rt;
      try {
        rt = pb.residual();
      } catch (const DomainError&) {
        continue;
      } catch (const RegularityError&) {
        continue;
      }
      const double nt = sup_of(rt);
      if (std::isfinite(nt) && nt <= (1.0 - 1e-4 * t) * norm) {
        r = std::move(rt);
        norm = nt;
        accepted = true;
        break;
      }
    }
    rep.iterations = it + 1;
    if (!accepted) {
      pb.set_state(x0);
      rep.message = "line search stagnated";
      break;
    }
  }
  rep.residual_sup = norm;
  rep.residual_l2 = r.norm() * std::sqrt(cell_volume);
  rep.converged = norm < opt.tolerance || (rep.message == "line search stagnated" && norm < 1e-8);
  if (rep.message.empty()) rep.message = rep.converged ? "converged" : "iteration limit reached";
  return rep;
}

double cell_volume(const SectionGrid& g) {
  double c = 1.0;
  for (int a = 0; a < g.base_dim(); ++a) c *= g.spacing(a);
  return c;
}

}  // namespace

SolveResult solve_el(const FieldModel& model, const Domain& domain, int resolution, const std::vector<Expression>& boundary,
                     const SolveOptions& options) {
  const int n = model.n;
  SectionGrid g = boundary_grid(model.m, n, domain, resolution, boundary);
  const ELDiscretization disc(model);
  if (disc.identically_zero()) {
    throw RegularityError("the Euler-Lagrange system vanishes identically (null Lagrangian); nothing to solve");
  }
  std::vector<std::size_t> interior;
  std::vector<long> uid(g.node_count(), -1);
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (!g.is_boundary(k)) {
      uid[k] = static_cast<long>(interior.size());
      interior.push_back(k);
    }
  }
  const auto dim = static_cast<Eigen::Index>(interior.size() * static_cast<std::size_t>(n));
  auto col = [&](std::size_t node, int a) { return static_cast<Eigen::Index>(uid[node] * n + (a - 1)); };

  NewtonProblem pb;
  pb.residual = [&]() {
    Eigen::VectorXd r(dim);
    std::vector<double> z;
    for (std::size_t i = 0; i < interior.size(); ++i) {
      const std::size_t k = interior[i];
      disc.fill(g, k, z);
      for (int a = 1; a <= n; ++a) {
        try {
          r(col(k, a)) = disc.residual[static_cast<std::size_t>(a - 1)](z);
        } catch (const DomainError& e) {
          throw DomainError(iterate_failure(g, k, "EL residual not evaluable"), e.subexpression());
        }
      }
    }
    return r;
  };
  pb.jacobian = [&]() {
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> z;
    for (const std::size_t k : interior) {
      disc.fill(g, k, z);
      for (int a = 1; a <= n; ++a) {
        for (const auto& [s, f] : disc.partials[static_cast<std::size_t>(a - 1)]) {
          const double d = f(z);
          if (d == 0.0) continue;
          const auto [b, st] = disc.slot_stencil(g, k, s);
          for (const auto& [j, w] : st) {
            if (uid[j] >= 0) trip.emplace_back(col(k, a), col(j, b), d * w);
          }
        }
      }
    }
    Eigen::SparseMatrix<double> J(dim, dim);
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
  };
  pb.state = [&]() {
    Eigen::VectorXd x(dim);
    for (const std::size_t k : interior)
      for (int a = 1; a <= n; ++a) x(col(k, a)) = g.y(a)[k];
    return x;
  };
  pb.set_state = [&](const Eigen::VectorXd& x) {
    for (const std::size_t k : interior)
      for (int a = 1; a <= n; ++a) g.y(a)[k] = x(col(k, a));
  };
  SolveReport rep = newton(pb, options, cell_volume(g), "degenerate velocity Hessian along the iterate");
  return {std::move(g), std::move(rep)};
}

// ---------------------------------------------------------------------------
// HDW discretization

SolveResult solve_hdw(const HamiltonianSystem& hs, const Domain& domain, int resolution,
                      const std::vector<Expression>& boundary, const SolveOptions& options) {
  const int m = hs.base_dim();
  const int n = hs.fiber_dim();
  const std::size_t nm = static_cast<std::size_t>(n * m);
  SectionGrid g = boundary_grid(m, n, domain, resolution, boundary);
  g.enable_momenta();
  const std::size_t count = g.node_count();

  auto slots_at = [&](std::size_t k) {
    std::vector<double> z = g.position(k);
    for (int a = 1; a <= n; ++a) z.push_back(g.y(a)[k]);
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu) z.push_back(g.p(a, nu)[k]);
    return z;
  };

  // initial momenta: dh/dp(x, y, p) = dy/dx pointwise, Newton from p = 0
  for (std::size_t k = 0; k < count; ++k) {
    Eigen::VectorXd target(static_cast<Eigen::Index>(nm));
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu) target((a - 1) * m + nu - 1) = grid_derivative(g, g.y(a), k, nu - 1);
    try {
      for (int it = 0; it < 40; ++it) {
        const auto z = slots_at(k);
        const auto hp = hs.grad_p(z);
        Eigen::VectorXd f(static_cast<Eigen::Index>(nm));
        for (std::size_t i = 0; i < nm; ++i) f(static_cast<Eigen::Index>(i)) = hp[i] - target(static_cast<Eigen::Index>(i));
        if (f.lpNorm<Eigen::Infinity>() < 1e-13) break;
        const auto hess = hs.hessian_yp(z);
        Eigen::MatrixXd jpp(static_cast<Eigen::Index>(nm), static_cast<Eigen::Index>(nm));
        for (std::size_t i = 0; i < nm; ++i)
          for (std::size_t j = 0; j < nm; ++j)
            jpp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = hess[n + i][n + j];
        const Eigen::VectorXd step = jpp.fullPivLu().solve(f);
        double t = 1.0;
        for (; t > 1e-6; t *= 0.5) {
          std::vector<double> saved;
          for (int a = 1; a <= n; ++a)
            for (int nu = 1; nu <= m; ++nu) {
              saved.push_back(g.p(a, nu)[k]);
              g.p(a, nu)[k] -= t * step((a - 1) * m + nu - 1);
            }
          try {
            const auto zt = slots_at(k);
            const auto ht = hs.grad_p(zt);
            double nt = 0.0;
            for (std::size_t i = 0; i < nm; ++i) nt = std::max(nt, std::fabs(ht[i] - target(static_cast<Eigen::Index>(i))));
            if (nt < f.lpNorm<Eigen::Infinity>()) break;
          } catch (const Error&) {
          }
          std::size_t i = 0;
          for (int a = 1; a <= n; ++a)
            for (int nu = 1; nu <= m; ++nu) g.p(a, nu)[k] = saved[i++];
        }
        if (t <= 1e-6) break;
      }
    } catch (const Error&) {
      for (int a = 1; a <= n; ++a)
        for (int nu = 1; nu <= m; ++nu) g.p(a, nu)[k] = 0.0;
    }
  }

  std::vector<long> yid(count, -1);
  std::vector<std::size_t> interior;
  for (std::size_t k = 0; k < count; ++k) {
    if (!g.is_boundary(k)) {
      yid[k] = static_cast<long>(interior.size());
      interior.push_back(k);
    }
  }
  const auto ny = static_cast<Eigen::Index>(interior.size() * static_cast<std::size_t>(n));
  const auto dim = ny + static_cast<Eigen::Index>(count * nm);
  auto ycol = [&](std::size_t node, int a) { return static_cast<Eigen::Index>(yid[node] * n + (a - 1)); };
  auto pcol = [&](std::size_t node, int a, int nu) {
    return ny + static_cast<Eigen::Index>(node * nm + static_cast<std::size_t>((a - 1) * m + nu - 1));
  };
  // rows: R1 (node, A, nu) first, then R2 (interior node, A)
  auto r1row = [&](std::size_t node, int a, int nu) {
    return static_cast<Eigen::Index>(node * nm + static_cast<std::size_t>((a - 1) * m + nu - 1));
  };
  auto r2row = [&](std::size_t node, int a) {
    return static_cast<Eigen::Index>(count * nm) + static_cast<Eigen::Index>(yid[node] * n + (a - 1));
  };

  NewtonProblem pb;
  pb.residual = [&]() {
    const HDWResidual res = hdw_residual(hs, g);
    Eigen::VectorXd r(dim);
    for (std::size_t k = 0; k < count; ++k)
      for (int a = 1; a <= n; ++a) {
        for (int nu = 1; nu <= m; ++nu) r(r1row(k, a, nu)) = res.r1[static_cast<std::size_t>((a - 1) * m + nu - 1)][k];
        if (yid[k] >= 0) r(r2row(k, a)) = res.r2[static_cast<std::size_t>(a - 1)][k];
      }
    return r;
  };
  pb.jacobian = [&]() {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t k = 0; k < count; ++k) {
      const auto z = slots_at(k);
      const auto hess = hs.hessian_yp(z);  // (y, p) x (y, p)
      const bool inner = yid[k] >= 0;
      for (int a = 1; a <= n; ++a) {
        for (int nu = 1; nu <= m; ++nu) {
          const Eigen::Index row = r1row(k, a, nu);
          const std::size_t hi = static_cast<std::size_t>(n) + static_cast<std::size_t>((a - 1) * m + nu - 1);
          for (const auto& [j, w] : derivative_stencil(g, k, nu - 1)) {
            if (yid[j] >= 0) trip.emplace_back(row, ycol(j, a), w);
          }
          for (int b = 1; b <= n; ++b) {
            if (inner) trip.emplace_back(row, ycol(k, b), -hess[hi][static_cast<std::size_t>(b - 1)]);
            for (int rho = 1; rho <= m; ++rho) {
              trip.emplace_back(row, pcol(k, b, rho), -hess[hi][static_cast<std::size_t>(n + (b - 1) * m + rho - 1)]);
            }
          }
        }
        if (!inner) continue;
        const Eigen::Index row = r2row(k, a);
        const std::size_t hi = static_cast<std::size_t>(a - 1);
        for (int nu = 1; nu <= m; ++nu)
          for (const auto& [j, w] : derivative_stencil(g, k, nu - 1)) trip.emplace_back(row, pcol(j, a, nu), w);
        for (int b = 1; b <= n; ++b) {
          trip.emplace_back(row, ycol(k, b), hess[hi][static_cast<std::size_t>(b - 1)]);
          for (int rho = 1; rho <= m; ++rho) {
            trip.emplace_back(row, pcol(k, b, rho), hess[hi][static_cast<std::size_t>(n + (b - 1) * m + rho - 1)]);
          }
        }
      }
    }
    Eigen::SparseMatrix<double> J(dim, dim);
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
  };
  pb.state = [&]() {
    Eigen::VectorXd x(dim);
    for (const std::size_t k : interior)
      for (int a = 1; a <= n; ++a) x(ycol(k, a)) = g.y(a)[k];
    for (std::size_t k = 0; k < count; ++k)
      for (int a = 1; a <= n; ++a)
        for (int nu = 1; nu <= m; ++nu) x(pcol(k, a, nu)) = g.p(a, nu)[k];
    return x;
  };
  pb.set_state = [&](const Eigen::VectorXd& x) {
    for (const std::size_t k : interior)
      for (int a = 1; a <= n; ++a) g.y(a)[k] = x(ycol(k, a));
    for (std::size_t k = 0; k < count; ++k)
      for (int a = 1; a <= n; ++a)
        for (int nu = 1; nu <= m; ++nu) g.p(a, nu)[k] = x(pcol(k, a, nu));
  };
  SolveReport rep = newton(pb, options, cell_volume(g), "degenerate momentum Hessian of h along the iterate");
  if (!rep.converged && rep.residual_l2 < 1e-8 * static_cast<double>(count)) {
    rep.converged = true;
    rep.message = "residual stagnated below the grid-size threshold";
  }
  return {std::move(g), std::move(rep)};
}

// ---------------------------------------------------------------------------

SectionGrid prolongation(const SectionGrid& phi) {
  SectionGrid out = phi;
  out.enable_velocities();
  for (std::size_t k = 0; k < out.node_count(); ++k)
    for (int a = 1; a <= out.fiber_dim(); ++a)
      for (int nu = 1; nu <= out.base_dim(); ++nu) out.v(a, nu)[k] = grid_derivative(phi, phi.y(a), k, nu - 1);
  return out;
}

SectionGrid legendre_section(const FieldModel& model, const SectionGrid& phi) {
  if (phi.base_dim() != model.m || phi.fiber_dim() != model.n) throw ModelError("grid does not match the model");
  SectionGrid out = prolongation(phi);
  out.enable_momenta();
  const auto slots = model.space(SpaceTag::jet)->coordinates();
  std::vector<CompiledExpression> lv;
  for (const auto& v : velocity_symbols(model.m, model.n)) lv.emplace_back(differentiate(model.lagrangian, v), slots);
  std::vector<double> z;
  for (std::size_t k = 0; k < out.node_count(); ++k) {
    z = out.position(k);
    for (int a = 1; a <= model.n; ++a) z.push_back(out.y(a)[k]);
    for (int a = 1; a <= model.n; ++a)
      for (int nu = 1; nu <= model.m; ++nu) z.push_back(out.v(a, nu)[k]);
    try {
      for (int a = 1; a <= model.n; ++a)
        for (int nu = 1; nu <= model.m; ++nu) out.p(a, nu)[k] = lv[static_cast<std::size_t>((a - 1) * model.m + nu - 1)](z);
    } catch (const DomainError& e) {
      throw DomainError(iterate_failure(out, k, "Legendre map not evaluable"), e.subexpression());
    }
  }
  return out;
}

namespace {

double max_spacing(const SectionGrid& g) {
  double h = 0.0;
  for (int a = 0; a < g.base_dim(); ++a) h = std::max(h, g.spacing(a));
  return h;
}

}  // namespace

EquivalenceReport verify_equivalence(const FieldModel& model, const SectionGrid& phi) {
  EquivalenceReport rep;
  rep.h = max_spacing(phi);
  rep.allowance = kEquivalenceAllowance * rep.h * rep.h;
  const GridResidual el = el_grid_residual(model, phi);
  rep.el_sup = el.norms.sup;
  rep.el_node = el.norms.sup_node;
  const HamiltonianSystem hs = hamiltonian_system(model);
  const HDWResidual hdw = hdw_residual(hs, legendre_section(model, phi));
  rep.hdw_sup = hdw.sup();
  rep.hdw_node = hdw.r1_norms.sup >= hdw.r2_norms.sup ? hdw.r1_norms.sup_node : hdw.r2_norms.sup_node;
  const bool el_ok = rep.el_sup <= rep.allowance;
  const bool hdw_ok = rep.hdw_sup <= 10.0 * rep.el_sup + rep.allowance;
  rep.passed = el_ok && hdw_ok;
  std::ostringstream os;
  os << "EL residual sup " << rep.el_sup << " at " << location_string(phi, rep.el_node) << "; HDW residual sup "
     << rep.hdw_sup << " at " << location_string(phi, rep.hdw_node) << "; allowance " << rep.allowance;
  if (!el_ok) os << "; the section does not solve the Euler-Lagrange equations";
  if (!hdw_ok) os << "; the Legendre image does not solve the HDW equations";
  rep.message = os.str();
  return rep;
}

EquivalenceReport verify_equivalence_converse(const FieldModel& model, const HamiltonianSystem& hs,
                                              const SectionGrid& psi) {
  EquivalenceReport rep;
  rep.h = max_spacing(psi);
  rep.allowance = kEquivalenceAllowance * rep.h * rep.h;
  const HDWResidual hdw = hdw_residual(hs, psi);
  rep.hdw_sup = hdw.sup();
  rep.hdw_node = hdw.r1_norms.sup >= hdw.r2_norms.sup ? hdw.r1_norms.sup_node : hdw.r2_norms.sup_node;
  SectionGrid phi(psi.base_dim(), psi.fiber_dim(), psi.bounds(), psi.resolution());
  for (int a = 1; a <= psi.fiber_dim(); ++a) phi.y(a) = psi.y(a);
  const GridResidual el = el_grid_residual(model, phi);
  rep.el_sup = el.norms.sup;
  rep.el_node = el.norms.sup_node;
  const bool hdw_ok = rep.hdw_sup <= rep.allowance;
  const bool el_ok = rep.el_sup <= 10.0 * rep.hdw_sup + rep.allowance;
  rep.passed = hdw_ok && el_ok;
  std::ostringstream os;
  os << "HDW residual sup " << rep.hdw_sup << " at " << location_string(psi, rep.hdw_node) << "; EL residual sup "
     << rep.el_sup << " at " << location_string(psi, rep.el_node) << "; allowance " << rep.allowance;
  if (!hdw_ok) os << "; the section does not solve the HDW equations";
  if (!el_ok) os << "; its field component does not solve the Euler-Lagrange equations";
  rep.message = os.str();
  return rep;
}

std::vector<double> cosine_bump(const SectionGrid& phi, const std::vector<double>& center,
                                const std::vector<double>& half_width, double amplitude) {
  std::vector<double> d(phi.node_count(), 0.0);
  const double pi = std::acos(-1.0);
  for (std::size_t k = 0; k < phi.node_count(); ++k) {
    const auto x = phi.position(k);
    double v = amplitude;
    for (std::size_t a = 0; a < x.size() && v != 0.0; ++a) {
      const double u = (x[a] - center[a]) / half_width[a];
      v = std::fabs(u) < 1.0 ? v * 0.5 * (1.0 + std::cos(pi * u)) : 0.0;
    }
    d[k] = v;
  }
  return d;
}

VariationalReport variational_check(const FieldModel& model, const SectionGrid& phi, int trials, std::uint64_t seed) {
  if (trials < 1) throw ModelError("variational check needs at least one trial");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double t = 1e-4;
  const double vol = phi.volume();
  VariationalReport rep;
  SectionGrid work = phi;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> c;
    std::vector<double> w;
    for (int a = 0; a < phi.base_dim(); ++a) {
      const auto [lo, hi] = phi.bounds()[static_cast<std::size_t>(a)];
      const double len = hi - lo;
      // keep the support clear of the one-sided boundary stencils
      const double reach = 4.0 * phi.spacing(a);
      const double half = std::min((0.15 + 0.2 * unit(rng)) * len, 0.5 * len - reach - phi.spacing(a));
      if (half <= phi.spacing(a)) throw ModelError("grid too coarse for interior bump variations");
      const double margin = half + reach;
      c.push_back(lo + margin + (len - 2.0 * margin) * unit(rng));
      w.push_back(half);
    }
    const double amp = 0.5 + 0.5 * unit(rng);
    const int field = trial % phi.fiber_dim() + 1;
    const auto delta = cosine_bump(phi, c, w, amp);
    double dmax = 0.0;
    for (double d : delta) dmax = std::max(dmax, std::fabs(d));
    auto& y = work.y(field);
    const auto& y0 = phi.y(field);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = y0[k] + t * delta[k];
    const double plus = action(model, work);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = y0[k] - t * delta[k];
    const double minus = action(model, work);
    y = y0;
    const double val = dmax > 0.0 ? std::fabs(plus - minus) / (2.0 * t * dmax * vol) : 0.0;
    rep.per_trial.push_back(val);
    rep.max_scaled = std::max(rep.max_scaled, val);
  }
  return rep;
}

}  // namespace msym
