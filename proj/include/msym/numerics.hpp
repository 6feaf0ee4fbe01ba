#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msym/geometry.hpp"
#include "msym/grid.hpp"
#include "msym/hamiltonian.hpp"
#include "msym/unified.hpp"

namespace msym {

using Domain = std::vector<std::pair<double, double>>;

/// Boundary data as expressions in the base coordinates, one per field.
/// Accepts `plane(a,b,c)` (y = a x1 + b x2 + c, with m+1 arguments in
/// general), `scherk` (y = log(cos x1) - log(cos x2)) or an expression.
Expression boundary_preset(std::string_view text, int m);

/// Fills every node of `g` from the boundary expressions (exact-solution grids).
void fill_from(SectionGrid& g, const std::vector<Expression>& fields);

/// Transfinite (Coons) interpolation of the boundary values of `g` into its
/// interior; m = 1 or 2.
void coons_fill(SectionGrid& g);

struct SolveOptions {
  double tolerance = 1e-10;  // residual sup-norm
  int max_iterations = 60;
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double residual_sup = 0.0;
  double residual_l2 = 0.0;
  std::string message;
};

struct SolveResult {
  SectionGrid grid;
  SolveReport report;
};

/// Interior residuals of the Euler-Lagrange system with central differences
/// (the discretization solve_el drives to zero). One vector per field.
struct GridResidual {
  std::vector<std::vector<double>> values;
  ResidualNorms norms;
};
GridResidual el_grid_residual(const FieldModel& model, const SectionGrid& phi);

/// Damped Newton with Armijo halving on the central-difference EL system,
/// Dirichlet data from `boundary`. Coons initial guess. Throws
/// RegularityError when the linearization is singular.
SolveResult solve_el(const FieldModel& model, const Domain& domain, int resolution, const std::vector<Expression>& boundary,
                     const SolveOptions& options = {});

/// Newton on the stacked HDW residuals over interior y and all p. Initial y
/// from Coons, initial p by pointwise inversion of dh/dp = dy/dx.
SolveResult solve_hdw(const HamiltonianSystem& hs, const Domain& domain, int resolution,
                      const std::vector<Expression>& boundary, const SolveOptions& options = {});

/// Adds v = dy/dx (grid derivatives) to a copy of phi.
SectionGrid prolongation(const SectionGrid& phi);

/// Adds v = dy/dx and p = dL/dv(x, y, v) to a copy of phi.
SectionGrid legendre_section(const FieldModel& model, const SectionGrid& phi);

/// O(h^2) allowance constant used by the equivalence verdicts.
inline constexpr double kEquivalenceAllowance = 25.0;

struct EquivalenceReport {
  double h = 0.0;             // largest grid spacing
  double el_sup = 0.0;
  double hdw_sup = 0.0;
  std::size_t el_node = 0;
  std::size_t hdw_node = 0;
  double allowance = 0.0;     // kEquivalenceAllowance * h^2
  bool passed = false;
  std::string message;
};

/// Lagrangian -> Hamiltonian: psi = FL o j1 phi. Passes iff the EL residual
/// of phi is within the allowance and the HDW residual of psi is at most
/// 10 x the EL residual plus the allowance.
EquivalenceReport verify_equivalence(const FieldModel& model, const SectionGrid& phi);

/// Hamiltonian -> Lagrangian: the y-part of an HDW solution psi must solve
/// the EL system. Passes iff the HDW residual is within the allowance and
/// the EL residual is at most 10 x the HDW residual plus the allowance.
EquivalenceReport verify_equivalence_converse(const FieldModel& model, const HamiltonianSystem& hs,
                                              const SectionGrid& psi);

struct VariationalReport {
  double max_scaled = 0.0;
  std::vector<double> per_trial;
};

/// Max over random interior cosine bumps delta of
/// |A(phi + t delta) - A(phi - t delta)| / (2 t |delta|_inf vol), t = 1e-4.
VariationalReport variational_check(const FieldModel& model, const SectionGrid& phi, int trials,
                                    std::uint64_t seed = 20091106);

/// Value of one bump trial at the nodes of phi (exposed for tests).
std::vector<double> cosine_bump(const SectionGrid& phi, const std::vector<double>& center,
                                const std::vector<double>& half_width, double amplitude);

}  // namespace msym
