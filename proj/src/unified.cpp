#include "msym/unified.hpp"

#include "msym/errors.hpp"

namespace msym {

UnifiedSystem build_unified(const FieldModel& model) {
  const int m = model.m;
  const int n = model.n;
  const Expression& L = model.lagrangian;
  UnifiedSystem us{model,
                   model.space(SpaceTag::unified_w),
                   model.space(SpaceTag::unified_w0),
                   Expression(),
                   Expression(),
                   Expression(),
                   {},
                   CoordinateForm(model.space(SpaceTag::unified_w0), m),
                   CoordinateForm(model.space(SpaceTag::unified_w0), m + 1)};
  std::vector<Expression> pv;
  for (int a = 1; a <= n; ++a)
    for (int al = 1; al <= m; ++al) {
      pv.push_back(Expression(Symbol::p(a, al)) * Expression(Symbol::v(a, al)));
      us.primary_constraints.push_back(Expression(Symbol::p(a, al)) - differentiate(L, Symbol::v(a, al)));
    }
  const Expression pv_sum = add(pv);
  us.coupling = Expression(Symbol::affine()) + pv_sum;
  us.constraint = us.coupling - L;
  us.hamiltonian = pv_sum - L;

  const SpacePtr& sp = us.w0;
  CoordinateForm theta = (L - pv_sum) * volume_form(sp);
  for (int a = 1; a <= n; ++a)
    for (int al = 1; al <= m; ++al) {
      theta += wedge(CoordinateForm::differential(sp, Symbol::y(a)), Expression(Symbol::p(a, al)) * hypersurface_form(sp, al));
    }
  us.omega0 = -exterior_derivative(theta);
  us.theta0 = std::move(theta);
  return us;
}

CoordinateForm UnifiedSystem::omega0_display() const {
  const SpacePtr& sp = w0;
  CoordinateForm out = wedge(differential(sp, hamiltonian), volume_form(sp));
  for (int a = 1; a <= model.n; ++a)
    for (int al = 1; al <= model.m; ++al) {
      out -= wedge(wedge(CoordinateForm::differential(sp, Symbol::p(a, al)), CoordinateForm::differential(sp, Symbol::y(a))),
                   hypersurface_form(sp, al));
    }
  return out;
}

std::map<Symbol, Expression> UnifiedSystem::embedding() const {
  auto phi = identity_map(*w0);
  phi.emplace(Symbol::affine(), -hamiltonian);
  return phi;
}

std::map<Symbol, Expression> UnifiedSystem::graph_map() const {
  auto phi = identity_map(*model.space(SpaceTag::jet));
  for (int a = 1; a <= model.n; ++a)
    for (int al = 1; al <= model.m; ++al) phi.emplace(Symbol::p(a, al), differentiate(model.lagrangian, Symbol::v(a, al)));
  return phi;
}

UnifiedResidual unified_residual(const UnifiedSystem& us, const SectionGrid& psi0) {
  const int m = us.model.m;
  const int n = us.model.n;
  if (psi0.base_dim() != m || psi0.fiber_dim() != n) throw ModelError("grid does not match the model");
  if (!psi0.has_velocities() || !psi0.has_momenta()) throw ModelError("unified residual needs y, v and p on the grid");
  const SpacePtr jet = us.model.space(SpaceTag::jet);
  const auto& slots = jet->coordinates();
  std::vector<CompiledExpression> lv;
  std::vector<CompiledExpression> ly;
  for (int a = 1; a <= n; ++a) {
    ly.emplace_back(differentiate(us.model.lagrangian, Symbol::y(a)), slots);
    for (int al = 1; al <= m; ++al) lv.emplace_back(differentiate(us.model.lagrangian, Symbol::v(a, al)), slots);
  }
  const std::size_t count = psi0.node_count();
  const std::size_t nm = static_cast<std::size_t>(n * m);
  UnifiedResidual out;
  out.primary.assign(nm, std::vector<double>(count, 0.0));
  out.holonomy.assign(nm, std::vector<double>(count, 0.0));
  out.euler.assign(static_cast<std::size_t>(n), std::vector<double>(count, 0.0));
  std::vector<double> z;
  for (std::size_t k = 0; k < count; ++k) {
    z = psi0.position(k);
    for (int a = 1; a <= n; ++a) z.push_back(psi0.y(a)[k]);
    for (int a = 1; a <= n; ++a)
      for (int al = 1; al <= m; ++al) z.push_back(psi0.v(a, al)[k]);
    const bool interior = !psi0.is_boundary(k);
    try {
      for (int a = 1; a <= n; ++a) {
        double div = 0.0;
        for (int al = 1; al <= m; ++al) {
          const std::size_t c = static_cast<std::size_t>((a - 1) * m + al - 1);
          out.primary[c][k] = psi0.p(a, al)[k] - lv[c](z);
          out.holonomy[c][k] = psi0.v(a, al)[k] - grid_derivative(psi0, psi0.y(a), k, al - 1);
          if (interior) div += grid_derivative(psi0, psi0.p(a, al), k, al - 1);
        }
        if (interior) out.euler[static_cast<std::size_t>(a - 1)][k] = div - ly[static_cast<std::size_t>(a - 1)](z);
      }
    } catch (const DomainError& e) {
      throw DomainError(std::string("Lagrangian not evaluable at ") + location_string(psi0, k), e.subexpression());
    }
  }
  out.primary_norms = residual_norms(psi0, out.primary);
  out.holonomy_norms = residual_norms(psi0, out.holonomy);
  out.euler_norms = residual_norms(psi0, out.euler);
  return out;
}

}  // namespace msym
