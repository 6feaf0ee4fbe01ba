#include <gtest/gtest.h>

#include <cmath>

#include "msym/errors.hpp"
#include "msym/lagrangian.hpp"
#include "msym/numerics.hpp"
#include "msym/parser.hpp"
#include "support.hpp"

using namespace msym;

namespace {

CoordinateForm d_of(const SpacePtr& sp, const Symbol& s) { return CoordinateForm::differential(sp, s); }

// Random polynomial of total degree <= 3 in the jet coordinates of (m, n).
std::string random_polynomial_lagrangian(int m, int n, std::mt19937_64& rng) {
  const auto jet = CoordinateSpace::make(SpaceTag::jet, m, n);
  std::uniform_int_distribution<int> coef(-3, 3);
  std::uniform_int_distribution<std::size_t> var(0, jet->dim() - 1);
  std::uniform_int_distribution<int> deg(1, 3);
  std::string s = "1";
  for (int t = 0; t < 6; ++t) {
    std::string term = "(" + std::to_string(coef(rng)) + ")";
    const int d = deg(rng);
    for (int i = 0; i < d; ++i) term += "*" + jet->coordinate(var(rng)).name();
    s += " + " + term;
  }
  // keep some velocity dependence in every model
  s += " + v1_1^2";
  return s;
}

Assignment jet_point(double x1, double x2, double y, double v1, double v2) {
  return {{Symbol::x(1), x1}, {Symbol::x(2), x2}, {Symbol::y(1), y}, {Symbol::v(1, 1), v1}, {Symbol::v(1, 2), v2}};
}

double finite_difference_hessian(const Expression& L, Assignment a, const Symbol& s, const Symbol& t) {
  const double h = 1e-4;
  auto f = [&](double ds, double dt) {
    Assignment b = a;
    b[s] += ds;
    b[t] += dt;
    return evaluate(L, b);
  };
  return (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h);
}

}  // namespace

TEST(PoincareCartan, MinimalSurfaceDisplay) {
  const FieldModel model = build_model(2, 1, test::kMinimalSurface);
  const auto sp = model.space(SpaceTag::jet);
  const Expression L = model.lagrangian;
  const Expression v1 = Symbol::v(1, 1);
  const Expression v2 = Symbol::v(1, 2);
  const CoordinateForm dy = d_of(sp, Symbol::y(1));
  const CoordinateForm expected = (v1 / L) * wedge(dy, d_of(sp, Symbol::x(2))) -
                                  (v2 / L) * wedge(dy, d_of(sp, Symbol::x(1))) +
                                  L * (Expression(1) - pow(v1 / L, 2) - pow(v2 / L, 2)) * volume_form(sp);
  EXPECT_NE(compare_forms(poincare_cartan(model).theta, expected), Equality::different);
}

TEST(PoincareCartan, FreeField) {
  const FieldModel model = build_model(2, 1, test::kFreeField);
  const auto sp = model.space(SpaceTag::jet);
  const CoordinateForm dy = d_of(sp, Symbol::y(1));
  const CoordinateForm expected = Expression(Symbol::v(1, 1)) * wedge(dy, d_of(sp, Symbol::x(2))) -
                                  Expression(Symbol::v(1, 2)) * wedge(dy, d_of(sp, Symbol::x(1))) -
                                  parse("(v1_1^2 + v1_2^2)/2") * volume_form(sp);
  EXPECT_EQ(compare_forms(poincare_cartan(model).theta, expected), Equality::identical);
}

TEST(PoincareCartan, ConstantLagrangian) {
  const FieldModel model = build_model(2, 1, "7/2");
  const auto pc = poincare_cartan(model);
  EXPECT_EQ(compare_forms(pc.theta, Expression(Rational(7, 2)) * volume_form(model.space(SpaceTag::jet))),
            Equality::identical);
  EXPECT_TRUE(pc.omega.is_zero());
}

TEST(PoincareCartan, OmegaDisplayMatchesExteriorDerivativeOnRandomPolynomials) {
  std::mt19937_64 rng(test::kSeed);
  for (int m = 1; m <= 3; ++m)
    for (int n = 1; n <= 2; ++n)
      for (int trial = 0; trial < 3; ++trial) {
        const FieldModel model = build_model(m, n, random_polynomial_lagrangian(m, n, rng));
        const auto pc = poincare_cartan(model);
        EXPECT_EQ(compare_forms(poincare_cartan_omega_display(model), pc.omega), Equality::identical)
            << model.lagrangian.to_string();
      }
  const FieldModel ms = build_model(2, 1, test::kMinimalSurface);
  EXPECT_NE(compare_forms(poincare_cartan_omega_display(ms), poincare_cartan(ms).omega), Equality::different);
}

TEST(Regularity, MinimalSurfaceAtRest) {
  const FieldModel model = build_model(2, 1, test::kMinimalSurface);
  const Assignment pt = jet_point(0.1, 0.2, 0.3, 0.0, 0.0);
  const auto rep = regularity_certificate(model, std::vector<Assignment>{pt});
  ASSERT_EQ(rep.samples.size(), 1u);
  ASSERT_TRUE(rep.samples[0].determinant.has_value());
  EXPECT_NEAR(*rep.samples[0].determinant, 1.0, 1e-14);
  EXPECT_TRUE(rep.regular_on_samples());
  // finite-difference Hessian oracle
  const auto vs = velocity_symbols(2, 1);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_NEAR(evaluate(rep.hessian[i][j], pt), finite_difference_hessian(model.lagrangian, pt, vs[i], vs[j]), 1e-6);
}

TEST(Regularity, MinimalSurfaceDeterminantClosedForm) {
  const FieldModel model = build_model(2, 1, test::kMinimalSurface);
  const auto rep = regularity_certificate(model, {});
  EXPECT_NE(equivalent(rep.determinant, parse("(1 + v1_1^2 + v1_2^2)^(-2)")), Equality::different);
  std::mt19937_64 rng(test::kSeed);
  std::vector<Assignment> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(test::random_point(*model.space(SpaceTag::jet), rng, -3, 3));
  EXPECT_TRUE(regularity_certificate(model, pts).regular_on_samples());
}

TEST(Regularity, AffineLagrangianIsSingular) {
  const FieldModel model = build_model(2, 1, "v1_1");
  const auto rep = regularity_certificate(model, std::vector<Assignment>{jet_point(0, 0, 0, 0.3, 0.1)});
  EXPECT_TRUE(rep.identically_singular);
  EXPECT_TRUE(rep.determinant.is_zero());
  EXPECT_FALSE(rep.regular_on_samples());
}

TEST(Regularity, PerPointEvaluationErrorsReported) {
  const FieldModel model = build_model(2, 1, "sqrt(v1_1)^3 + v1_2^2");
  const auto rep = regularity_certificate(model, std::vector<Assignment>{jet_point(0, 0, 0, -1.0, 0.1)});
  ASSERT_EQ(rep.samples.size(), 1u);
  EXPECT_FALSE(rep.samples[0].determinant.has_value());
  EXPECT_FALSE(rep.samples[0].error.empty());
}

TEST(Regularity, HessianIsSymmetric) {
  std::mt19937_64 rng(test::kSeed + 1);
  for (int trial = 0; trial < 5; ++trial) {
    const FieldModel model = build_model(2, 2, random_polynomial_lagrangian(2, 2, rng));
    const auto hes = velocity_hessian(model);
    for (std::size_t i = 0; i < hes.size(); ++i)
      for (std::size_t j = 0; j < hes.size(); ++j) EXPECT_EQ(hes[i][j], hes[j][i]);
  }
}

TEST(ELSystem, MinimalSurfaceEquation) {
  const FieldModel model = build_model(2, 1, test::kMinimalSurface);
  const ELSystem el = el_system(model);
  ASSERT_EQ(el.residuals.size(), 1u);
  const Expression L3 = pow(parse("1 + y1_1^2 + y1_2^2"), Rational(3, 2));
  const Expression bracket = parse("(1 + y1_1^2)*y1_2_2 + (1 + y1_2^2)*y1_1_1 - 2*y1_1*y1_2*y1_1_2");
  EXPECT_NE(equivalent(el.residuals[0] * L3, -bracket), Equality::different);
  EXPECT_NE(el.to_string().find("EL[1]: "), std::string::npos);
}

TEST(ELSystem, FreeFieldIsLaplace) {
  const ELSystem el = el_system(build_model(2, 1, test::kFreeField));
  EXPECT_EQ(el.residuals[0], parse("-(y1_1_1 + y1_2_2)"));
}

TEST(ELSystem, NullLagrangian) {
  EXPECT_TRUE(el_system(build_model(2, 1, "v1_1")).residuals[0].is_zero());
  EXPECT_TRUE(el_system(build_model(2, 1, "x1*v1_2 - x2*v1_1 + y1*v1_1")).residuals[0].is_zero());
  EXPECT_EQ(el_system(build_model(2, 1, "x1*v1_1")).residuals[0], Expression(-1));
}

TEST(ELSystem, QuasilinearInSecondDerivatives) {
  std::mt19937_64 rng(test::kSeed + 2);
  for (int trial = 0; trial < 6; ++trial) {
    const int m = 1 + trial % 3;
    const int n = 1 + trial % 2;
    const FieldModel model = build_model(m, n, random_polynomial_lagrangian(m, n, rng));
    for (const auto& r : el_system(model).residuals) {
      for (int a = 1; a <= n; ++a)
        for (int nu = 1; nu <= m; ++nu)
          for (int mu = nu; mu <= m; ++mu) {
            const Expression c = differentiate(r, Symbol::ddy(a, nu, mu));
            EXPECT_FALSE(c.depends_on_kind(SymbolKind::jet_second)) << r.to_string();
          }
    }
  }
}

TEST(ELMultivector, FreeFieldTraceConstraint) {
  const FieldModel model = build_model(2, 1, test::kFreeField);
  const auto mv = el_multivector(model, jet_point(0.2, -0.3, 0.5, 0.4, -0.1));
  EXPECT_DOUBLE_EQ(mv.F[0], 0.4);
  EXPECT_DOUBLE_EQ(mv.F[1], -0.1);
  for (double g : mv.G) EXPECT_NEAR(g, 0.0, 1e-14);

  const FieldModel sourced = build_model(2, 1, "(v1_1^2 + v1_2^2)/2 - y1^2/2");
  const auto sv = el_multivector(sourced, jet_point(0.2, -0.3, 0.5, 0.4, -0.1));
  // G11 + G22 = dL/dy = -y, minimal norm splits it evenly
  EXPECT_NEAR(sv.G[0] + sv.G[3], -0.5, 1e-12);
  EXPECT_NEAR(sv.G[0], -0.25, 1e-12);
  EXPECT_NEAR(sv.G[1], 0.0, 1e-12);
  EXPECT_NEAR(sv.G[2], 0.0, 1e-12);
  for (double r : sv.constraint_residual) EXPECT_NEAR(r, 0.0, 1e-12);
}

TEST(ELMultivector, ScherkSecondDerivativesSolveTheGEquations) {
  const FieldModel model = build_model(2, 1, test::kMinimalSurface);
  const double a = 0.4;
  const double b = -0.7;
  const Assignment pt = jet_point(a, b, std::log(std::cos(a)) - std::log(std::cos(b)), -std::tan(a), std::tan(b));
  const std::vector<double> G = {-1.0 / (std::cos(a) * std::cos(a)), 0.0, 0.0, 1.0 / (std::cos(b) * std::cos(b))};
  const auto mv = el_multivector_with(model, pt, G);
  for (double r : mv.constraint_residual) EXPECT_LE(std::fabs(r), 1e-9);
  // a wrong second derivative violates them
  const auto bad = el_multivector_with(model, pt, {G[0] + 0.1, 0.0, 0.0, G[3]});
  EXPECT_GT(std::fabs(bad.constraint_residual[0]), 1e-3);
}

TEST(ELMultivector, ConstantLagrangianGivesZeroG) {
  const auto mv = el_multivector(build_model(2, 1, "3"), jet_point(0.1, 0.2, 0.3, 0.4, 0.5));
  for (double g : mv.G) EXPECT_EQ(g, 0.0);
}

TEST(ELMultivector, SingularHessianRefused) {
  EXPECT_THROW(el_multivector(build_model(2, 1, "v1_1^2/2 + y1*v1_2 + y1^2"), jet_point(0, 0, 0.5, 0, 0)),
               RegularityError);
}

TEST(ELMultivector, AnnihilatesOmegaAndIsTransverse) {
  std::mt19937_64 rng(test::kSeed + 3);
  std::vector<FieldModel> models = {build_model(2, 1, test::kMinimalSurface), build_model(2, 1, test::kFreeField)};
  for (int i = 0; i < 4; ++i) {
    const int m = 1 + i % 3;
    const int n = 1 + i % 2;
    models.push_back(build_model(m, n, test::random_hyperregular_lagrangian(m, n, rng)));
  }
  for (const auto& model : models) {
    const auto jet = model.space(SpaceTag::jet);
    const CompiledForm omega(poincare_cartan(model).omega);
    const NumericForm vol = volume_form<double>(jet);
    for (int k = 0; k < 10; ++k) {
      const Assignment pt = test::random_point(*jet, rng);
      const auto mv = el_multivector(model, pt);
      const NumericForm c = contract_multivector<double>(omega(test::slots_of(*jet, pt)), mv.factors);
      EXPECT_LE(max_abs(c), 1e-9) << model.lagrangian.to_string();
      EXPECT_NEAR(apply_form<double>(vol, mv.factors), 1.0, 1e-15);
    }
  }
}

TEST(Nondegeneracy, KernelOfPoincareCartanForm) {
  std::mt19937_64 rng(test::kSeed + 4);
  const FieldModel model = build_model(2, 1, test::kMinimalSurface);
  const auto omega = poincare_cartan(model).omega;
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(kernel_dimension(omega, test::random_point(*model.space(SpaceTag::jet), rng, -2, 2)), 0u);
  }
  const FieldModel affine = build_model(2, 1, "v1_1 + x1*y1");
  EXPECT_GT(kernel_dimension(poincare_cartan(affine).omega, test::random_point(*affine.space(SpaceTag::jet), rng)), 0u);
}

TEST(Action, WorkedValues) {
  SectionGrid g = SectionGrid::square(2, 1, 0.0, 1.0, 11);
  const FieldModel ms = build_model(2, 1, test::kMinimalSurface);
  g.fill_y(1, [](const std::vector<double>&) { return 0.0; });
  EXPECT_NEAR(action(ms, g), 1.0, 1e-14);
  g.fill_y(1, [](const std::vector<double>& x) { return x[0]; });
  EXPECT_NEAR(action(ms, g), std::sqrt(2.0), 1e-13);
  g.fill_y(1, [](const std::vector<double>& x) { return x[0] + 2 * x[1]; });
  EXPECT_NEAR(action(build_model(2, 1, test::kFreeField), g), 2.5, 1e-13);
}

TEST(LagrangianProperty, GateauxDerivativeMatchesResidualPairing) {
  // d/dt action(phi + t delta) = sum EL(phi) delta dV up to O(h^2)
  const FieldModel model = build_model(2, 1, test::kMinimalSurface);
  double prev = 0.0;
  for (int N : {33, 65}) {
    SectionGrid phi = SectionGrid::square(2, 1, -1.0, 1.0, N);
    phi.fill_y(1, [](const std::vector<double>& x) { return 0.5 * x[0] * x[0] * x[0] + 0.3 * x[0] * x[1]; });
    const auto res = el_grid_residual(model, phi);
    const double h = phi.spacing(0);
    std::mt19937_64 rng(test::kSeed);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const std::vector<double> c = {-0.3 + 0.6 * u(rng), -0.3 + 0.6 * u(rng)};
      const std::vector<double> w = {0.3 + 0.2 * u(rng), 0.3 + 0.2 * u(rng)};
      const auto delta = cosine_bump(phi, c, w, 1.0);
      const double t = 1e-4;
      SectionGrid plus = phi;
      SectionGrid minus = phi;
      for (std::size_t k = 0; k < phi.node_count(); ++k) {
        plus.y(1)[k] += t * delta[k];
        minus.y(1)[k] -= t * delta[k];
      }
      const double gateaux = (action(model, plus) - action(model, minus)) / (2 * t);
      double pairing = 0.0;
      for (std::size_t k = 0; k < phi.node_count(); ++k) pairing += res.values[0][k] * delta[k] * h * h;
      worst = std::max(worst, std::fabs(gateaux - pairing));
    }
    EXPECT_LE(worst, 2.0 * h * h) << "N = " << N;
    if (prev > 0) EXPECT_GT(prev / worst, 3.0);
    prev = worst;
  }
}
