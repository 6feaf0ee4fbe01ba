#pragma once

#include <map>
#include <vector>

#include "msym/forms.hpp"
#include "msym/geometry.hpp"
#include "msym/grid.hpp"
#include "msym/hamiltonian.hpp"

namespace msym {

/// Unified (velocity plus momentum) formulation of a first-order model.
///
/// W carries (x, y, v, p^nu_A, p); W0 is coordinatized by (x, y, v, p^nu_A)
/// with p eliminated through p = L - p^alpha_A v^A_alpha.
struct UnifiedSystem {
  FieldModel model;
  SpacePtr w;
  SpacePtr w0;
  /// p + p^alpha_A v^A_alpha, on W.
  Expression coupling;
  /// C - L = p + p^alpha_A v^A_alpha - L, on W; its zero set is W0.
  Expression constraint;
  /// H = -L + p^alpha_A v^A_alpha, on W0.
  Expression hamiltonian;
  /// p^alpha_A - dL/dv^A_alpha (A-major, then alpha); their zero set is W1.
  std::vector<Expression> primary_constraints;
  /// (L - p v) d^m x + p^alpha_A dy^A ^ d^{m-1}x_alpha.
  CoordinateForm theta0;
  /// -d theta0.
  CoordinateForm omega0;

  /// d(p v - L) ^ d^m x - dp^alpha_A ^ dy^A ^ d^{m-1}x_alpha built term by term.
  CoordinateForm omega0_display() const;
  /// W0 -> W: identity plus p -> L - p v.
  std::map<Symbol, Expression> embedding() const;
  /// J1 -> W0 onto W1: identity plus p^alpha_A -> dL/dv^A_alpha.
  std::map<Symbol, Expression> graph_map() const;
};

UnifiedSystem build_unified(const FieldModel& model);

/// Three residual families of a section of W0, one vector per component:
///   primary:   p^alpha_A - dL/dv^A_alpha            at every node
///   holonomy:  v^A_alpha - dy^A/dx^alpha             at every node
///   euler:     sum_alpha dp^alpha_A/dx^alpha - dL/dy^A   at interior nodes
struct UnifiedResidual {
  std::vector<std::vector<double>> primary;
  std::vector<std::vector<double>> holonomy;
  std::vector<std::vector<double>> euler;
  ResidualNorms primary_norms;
  ResidualNorms holonomy_norms;
  ResidualNorms euler_norms;
};

/// Needs y, v and p on the grid. Throws DomainError with the grid location
/// when L or its derivatives cannot be evaluated.
UnifiedResidual unified_residual(const UnifiedSystem& us, const SectionGrid& psi0);

}  // namespace msym
