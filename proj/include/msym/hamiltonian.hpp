#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msym/forms.hpp"
#include "msym/geometry.hpp"
#include "msym/grid.hpp"

namespace msym {

enum class InverseKind {
  linear,   ///< Hessian free of v: v = H^{-1}(p - b)
  radial,   ///< L = d + c*sqrt(g + e*|v|^2) with c, d, g, e free of v
  numeric,  ///< Newton on dL/dv = p
};

const char* to_string(InverseKind k);

/// Legendre maps of a model as pullback data.
///
/// `restricted` maps every coordinate of the restricted multimomentum
/// bundle (x, y, p^nu_A) to an expression on J1; `extended` adds
/// p -> L - v dL/dv. `inverse` maps each v^A_nu to an expression over
/// (x, y, p^nu_A) when a symbolic inverse was found and verified.
class LegendreMaps {
 public:
  explicit LegendreMaps(const FieldModel& model);

  const FieldModel& model() const { return model_; }
  const std::map<Symbol, Expression>& restricted() const { return restricted_; }
  const std::map<Symbol, Expression>& extended() const { return extended_; }
  const std::optional<std::map<Symbol, Expression>>& inverse() const { return inverse_; }
  InverseKind inverse_kind() const { return kind_; }

  /// Velocities (A-major, then nu) with dL/dv(x, y, v) = p. Uses the
  /// symbolic inverse when present, otherwise Newton from v = p (tolerance
  /// 1e-12, at most 50 iterations). `point` assigns x, y and p^nu_A. Throws
  /// RegularityError ("not invertible here") when Newton fails.
  std::vector<double> invert(const Assignment& point) const;
  std::vector<double> invert_numeric(const Assignment& point) const;

  /// Same on slot vectors in the restricted space's coordinate order.
  std::vector<double> invert_slots(std::span<const double> z) const;
  std::vector<double> invert_numeric_slots(std::span<const double> z) const;

  /// Closed-form h found together with the radial inverse.
  const std::optional<Expression>& closed_form_h() const { return closed_h_; }

  /// L and dL/dy^A on jet slots (x, y, v).
  double lagrangian_at(std::span<const double> jet) const;
  std::vector<double> lagrangian_dy(std::span<const double> jet) const;

 private:
  struct Compiled;

  FieldModel model_;
  std::map<Symbol, Expression> restricted_;
  std::map<Symbol, Expression> extended_;
  std::optional<std::map<Symbol, Expression>> inverse_;
  InverseKind kind_ = InverseKind::numeric;
  std::optional<Expression> closed_h_;
  std::shared_ptr<const Compiled> compiled_;
};

LegendreMaps legendre(const FieldModel& model);

enum class HamiltonianOrigin { derived_from_lagrangian, user_supplied };

/// Hamiltonian system on the restricted multimomentum bundle.
///
/// Pointwise quantities take the coordinate values in the restricted
/// space's order (x, y, p). When h is not symbolic (numeric Legendre
/// inverse), its partial derivatives come from the implicit-function
/// identities dh/dp^nu_A = v^A_nu and dh/dy^A = -dL/dy^A, both at the
/// inverted velocity.
class HamiltonianSystem {
 public:
  /// User-supplied h over (x, y, p^nu_A).
  static HamiltonianSystem from_hamiltonian(int m, int n, const Expression& h);

  int base_dim() const { return m_; }
  int fiber_dim() const { return n_; }
  HamiltonianOrigin origin() const { return origin_; }
  const SpacePtr& space() const { return space_; }
  bool is_symbolic() const { return h_.has_value(); }
  const std::optional<Expression>& h() const { return h_; }
  /// Theta_h = p^nu_A dy^A ^ d^{m-1}x_nu - h d^m x and Omega_h = -d Theta_h
  /// (symbolic h only).
  const std::optional<CoordinateForm>& theta() const { return theta_; }
  const std::optional<CoordinateForm>& omega() const { return omega_; }
  /// -dp^nu_A ^ dy^A ^ d^{m-1}x_nu + dh ^ d^m x built term by term.
  std::optional<CoordinateForm> omega_display() const;

  double value(std::span<const double> z) const;
  /// dh/dp^nu_A, A-major then nu.
  std::vector<double> grad_p(std::span<const double> z) const;
  /// dh/dy^A.
  std::vector<double> grad_y(std::span<const double> z) const;
  /// Omega_h at a point from the gradient of h.
  NumericForm omega_at(std::span<const double> z) const;

  /// Second derivatives of h at z, rows/cols over (y, p) in space order:
  /// symbolic when available, else central differences of the gradient.
  std::vector<std::vector<double>> hessian_yp(std::span<const double> z) const;

  /// Coordinate vector for the restricted space from an assignment.
  std::vector<double> slots(const Assignment& point) const;

 private:
  friend HamiltonianSystem hamiltonian_system(const FieldModel& model);
  friend HamiltonianSystem hamiltonian_system(const LegendreMaps& maps);
  struct Compiled;

  HamiltonianSystem(int m, int n, HamiltonianOrigin origin);
  void finish_symbolic(const Expression& h);

  int m_;
  int n_;
  HamiltonianOrigin origin_;
  SpacePtr space_;
  std::optional<Expression> h_;
  std::optional<CoordinateForm> theta_;
  std::optional<CoordinateForm> omega_;
  std::optional<LegendreMaps> legendre_;
  std::shared_ptr<const Compiled> compiled_;
};

/// h = p^nu_A (FL^{-1})^* v^A_nu - (FL^{-1})^* L. Throws RegularityError if
/// the Hessian of L vanishes identically (not hyper-regular).
HamiltonianSystem hamiltonian_system(const FieldModel& model);
HamiltonianSystem hamiltonian_system(const LegendreMaps& maps);

struct ResidualNorms {
  double sup = 0.0;
  double l2 = 0.0;            // sqrt(sum r^2 * cell volume)
  std::size_t sup_node = 0;   // node index of the supremum
  int sup_component = 0;      // 0-based component within the family
};

/// Sup and L2 norms over all components and nodes.
ResidualNorms residual_norms(const SectionGrid& g, const std::vector<std::vector<double>>& components);

/// HDW residuals on a grid:
///   R1^A_nu = dy^A/dx^nu - dh/dp^nu_A   at every node (one-sided at the edge)
///   R2_A    = sum_nu dp^nu_A/dx^nu + dh/dy^A   at interior nodes
struct HDWResidual {
  std::vector<std::vector<double>> r1;  // component (A-1)*m+(nu-1), per node
  std::vector<std::vector<double>> r2;  // component A-1, per node (0 on the boundary)
  ResidualNorms r1_norms;
  ResidualNorms r2_norms;
  double sup() const { return std::max(r1_norms.sup, r2_norms.sup); }
};

/// Throws DomainError naming the grid node when h cannot be evaluated.
HDWResidual hdw_residual(const HamiltonianSystem& hs, const SectionGrid& psi);

struct HDWMultivector {
  std::vector<double> F;  // (A-1)*m + (nu-1): dh/dp^nu_A
  std::vector<double> G;  // ((A-1)*m + (rho-1))*m + (nu-1): d/dp^rho_A component of factor nu
  std::vector<NumericVectorField> factors;
};

/// F = dh/dp; G with off-trace components zero and G^nu_{A nu} = -(1/m) dh/dy^A.
HDWMultivector hdw_multivector(const HamiltonianSystem& hs, const Assignment& point);

std::string location_string(const SectionGrid& g, std::size_t node);

}  // namespace msym
