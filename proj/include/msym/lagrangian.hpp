#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msym/forms.hpp"
#include "msym/geometry.hpp"
#include "msym/grid.hpp"

namespace msym {

struct PoincareCartanForms {
  CoordinateForm theta;  // degree m on J1
  CoordinateForm omega;  // degree m+1, = -d theta
};

/// Theta_L = dL/dv^A_nu dy^A ^ d^{m-1}x_nu - (dL/dv^A_nu v^A_nu - L) d^m x
/// and Omega_L = -d Theta_L.
PoincareCartanForms poincare_cartan(const FieldModel& model);

/// Omega_L assembled term by term from its four-term coordinate display
/// (second derivatives of L), independent of the exterior derivative.
CoordinateForm poincare_cartan_omega_display(const FieldModel& model);

using ExpressionMatrix = std::vector<std::vector<Expression>>;

/// d^2 L / dv^A_alpha dv^B_nu, rows and columns in velocity order.
ExpressionMatrix velocity_hessian(const FieldModel& model);

/// Symbolic determinant by cofactor expansion (memoized over column sets).
Expression determinant(const ExpressionMatrix& a);

struct RegularitySample {
  Assignment point;
  std::optional<double> determinant;  // empty when evaluation failed
  bool regular = false;
  std::string error;
};

struct RegularityReport {
  ExpressionMatrix hessian;
  Expression determinant;
  bool identically_singular = false;  // determinant normalizes to 0
  std::vector<RegularitySample> samples;

  bool regular_on_samples() const;
};

/// Regular at a point iff |det| > 1e-12.
RegularityReport regularity_certificate(const FieldModel& model, std::span<const Assignment> points);

/// Euler-Lagrange residuals over x, y^A and the jet symbols y^A_nu,
/// y^A_{nu mu} (quasilinear in the latter).
struct ELSystem {
  int m = 1;
  int n = 1;
  std::vector<Expression> residuals;

  std::string to_string() const;
};

ELSystem el_system(const FieldModel& model);

/// v^A_nu -> y^A_nu.
std::map<Symbol, Expression> velocity_to_jet(int m, int n);

/// Decomposable Euler-Lagrange multivector at a point, f = 1:
/// X_nu = d/dx^nu + F^A_nu d/dy^A + G^A_{nu rho} d/dv^A_rho.
struct ELMultivector {
  std::vector<double> F;  // index (A-1)*m + (nu-1)
  std::vector<double> G;  // index ((A-1)*m + (nu-1))*m + (rho-1)
  std::vector<NumericVectorField> factors;
  /// Residuals of the n linear G-equations at the point.
  std::vector<double> constraint_residual;
};

/// Semiholonomic F = v plus the minimal-norm symmetric G solving the
/// G-equations. When the G-equations vanish identically at the point (e.g.
/// constant L) every G solves them and G = 0 is returned; otherwise throws
/// RegularityError when the velocity Hessian is singular.
ELMultivector el_multivector(const FieldModel& model, const Assignment& point);

/// Same construction with a caller-supplied G (e.g. second derivatives of a
/// known solution); only the residuals are computed.
ELMultivector el_multivector_with(const FieldModel& model, const Assignment& point, std::vector<double> G);

/// Connection with the factors of `mv` as horizontal fields.
NumericConnection to_connection(const std::vector<NumericVectorField>& factors);

/// Trapezoid-rule integral of L(x, phi, d phi) over the grid box.
double action(const FieldModel& model, const SectionGrid& phi);

}  // namespace msym
