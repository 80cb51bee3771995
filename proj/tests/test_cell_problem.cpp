#include "oracles.hpp"
#include "rodlim/cell_problem.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace rodlim;

namespace {

std::shared_ptr<const CrossSection> disc(int rings) {
  return std::make_shared<const CrossSection>(normalize(sections::disc(rings)));
}

WarpField random_warp(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  WarpField w = WarpField::zero(n);
  for (auto& v : w.nodal) v = Vec3(g(rng), g(rng), g(rng));
  return w;
}

}  // namespace

TEST(CellProblem, SkewParamConvention) {
  const SkewParam f{1.0, 2.0, 3.0};
  const Mat3 m = f.matrix();
  EXPECT_LT((m + m.transpose()).norm(), 1e-15);
  const SkewParam back = SkewParam::from_matrix(m);
  EXPECT_EQ(back.a, 1.0);
  EXPECT_EQ(back.b, 2.0);
  EXPECT_EQ(back.c, 3.0);
  const Vec2 x(0.5, -0.25);
  EXPECT_LT((cell_first_column(f, x) - (x.x() * m.col(1) + x.y() * m.col(2))).norm(), 1e-15);
}

TEST(CellProblem, RequiresNormalizedSection) {
  auto raw = std::make_shared<const CrossSection>(sections::disc(2));
  EXPECT_THROW(CellProblem(raw, ElasticTensor({1.0, 1.0})), InputError);
}

TEST(CellProblem, ProjectionOntoAdmissibleClass) {
  auto s = disc(4);
  std::mt19937_64 rng(1);
  const WarpField w = random_warp(s->num_vertices(), rng);
  EXPECT_GT(class_residual(*s, w).max_abs(), 1e-3);
  const WarpField p = project_admissible(*s, w);
  EXPECT_LT(class_residual(*s, p).max_abs(), 1e-13);
  const WarpField pp = project_admissible(*s, p);
  for (std::size_t i = 0; i < p.nodal.size(); ++i) EXPECT_LT((pp.nodal[i] - p.nodal[i]).norm(), 1e-12);
}

TEST(CellProblem, SolutionIsAdmissibleStationaryAndMinimal) {
  auto s = disc(6);
  const CellProblem cell(s, ElasticTensor({1.0, 1.0}));
  std::mt19937_64 rng(2);
  const SkewParam f{0.7, -0.3, 1.1};
  const CellSolution sol = cell.solve(f);
  EXPECT_LT(sol.constraint_residual, 1e-12);
  EXPECT_LT(class_residual(*s, sol.warp).max_abs(), 1e-12);
  EXPECT_NEAR(cell.energy(f, sol.warp), sol.energy, 1e-12 * sol.energy);
  EXPECT_LT(verify_neumann(*s, cell.stress(f, sol.warp)), 1e-10);
  for (int k = 0; k < 10; ++k) {
    const WarpField other = sol.warp + project_admissible(*s, random_warp(s->num_vertices(), rng)) * 0.01;
    EXPECT_GT(cell.energy(f, other), sol.energy);
  }
  // Zero warping is admissible but not optimal under bending with lambda > 0.
  EXPECT_GT(cell.energy(f, WarpField::zero(s->num_vertices())), sol.energy);
}

TEST(CellProblem, NeumannCheckIsZeroForZeroStress) {
  auto s = disc(3);
  StressField zero;
  zero.values.assign(3 * s->num_triangles(), Mat3::Zero());
  EXPECT_EQ(verify_neumann(*s, zero), 0.0);
}

TEST(CellProblem, SolutionIsLinearInCurvature) {
  auto s = disc(5);
  const CellProblem cell(s, ElasticTensor({1.0, 0.5}));
  const CellSolution a = cell.solve({1.0, 0.0, 0.0});
  const CellSolution c = cell.solve({0.0, 0.0, 1.0});
  const CellSolution ac = cell.solve({2.0, 0.0, -3.0});
  for (std::size_t i = 0; i < ac.warp.nodal.size(); ++i)
    EXPECT_LT((ac.warp.nodal[i] - 2.0 * a.warp.nodal[i] + 3.0 * c.warp.nodal[i]).norm(), 1e-10);
}

TEST(CellProblem, ReducedStiffnessMatchesUnitSolves) {
  auto s = normalize(sections::rectangle(2.0, 1.0, 8, 4));
  auto sp = std::make_shared<const CrossSection>(s);
  const CellProblem cell(sp, ElasticTensor({1.0, 1.0}));
  const ReducedStiffness q = cell.reduced_stiffness();
  EXPECT_NO_THROW(q.validate());
  EXPECT_TRUE(q.has_warp_basis());
  EXPECT_LT((q.Q1 - q.Q1.transpose()).norm(), 1e-12);
  EXPECT_NEAR(q.E_mod, 2.5, 1e-12);
  const SkewParam f{0.3, 0.2, -0.4};
  EXPECT_NEAR(q.quadratic(f), cell.solve(f).energy, 1e-10);
  // Symmetric section: no coupling between the principal bendings and twist.
  EXPECT_LT(std::abs(q.Q1(0, 1)), 1e-10);
  EXPECT_LT(std::abs(q.Q1(0, 2)), 1e-10);
  EXPECT_LT(std::abs(q.Q1(1, 2)), 1e-10);
}

TEST(CellProblem, ZeroPoissonBendingIsExact) {
  // lambda = 0: the unwarped field is already stress free in the section
  // directions, so Q1 bending = 2 mu I exactly.
  auto s = disc(4);
  const ReducedStiffness q = CellProblem(s, ElasticTensor({1.0, 0.0})).reduced_stiffness();
  const SectionMoments m = moments(*s);
  EXPECT_NEAR(q.Q1(0, 0), 2.0 * m.I2, 1e-12);
  EXPECT_NEAR(q.Q1(1, 1), 2.0 * m.I3, 1e-12);
}

TEST(CellProblem, DiscConstantsApproachClosedForms) {
  const double e = 2.5;
  double prev_bend = 1.0, prev_twist = 1.0;
  for (int rings : {6, 12, 24}) {
    const ReducedStiffness q = q1_matrix(*disc(rings), ElasticTensor({1.0, 1.0}));
    const double bend = std::abs(q.Q1(0, 0) / (e / (4 * std::numbers::pi)) - 1.0);
    const double twist = std::abs(q.Q1(2, 2) / (1.0 / (2 * std::numbers::pi)) - 1.0);
    EXPECT_LT(bend, prev_bend);
    EXPECT_LT(twist, prev_twist);
    EXPECT_NEAR(q.Q1(0, 0), q.Q1(1, 1), 1e-3 * q.Q1(0, 0));
    prev_bend = bend;
    prev_twist = twist;
  }
  EXPECT_LT(prev_bend, 0.01);
  EXPECT_LT(prev_twist, 0.01);
}

TEST(CellProblem, RectangleTorsionMatchesSeries) {
  // Unit-area 2 x 1 rectangle scaled by 1/sqrt(2): J = J(2,1) / 4.
  const double j = oracle::rectangle_torsion_constant(2.0, 1.0) / 4.0;
  const CrossSection s = normalize(sections::rectangle(2.0, 1.0, 32, 16));
  const ReducedStiffness q = q1_matrix(s, ElasticTensor({1.5, 1.0}));
  EXPECT_NEAR(q.Q1(2, 2) / (1.5 * j), 1.0, 0.01);
  // Torsion never exceeds the unwarped value mu * muS.
  EXPECT_LT(q.Q1(2, 2), 1.5 * moments(s).muS);
}

TEST(CellProblem, DiagonalStiffnessValidation) {
  EXPECT_NO_THROW(ReducedStiffness::diagonal(1.0, 1.0, 2.0, 3.0));
  EXPECT_THROW(ReducedStiffness::diagonal(0.0, 1.0, 1.0, 1.0), InputError);
  EXPECT_THROW(ReducedStiffness::diagonal(1.0, 1.0, -1.0, 1.0), InputError);
  ReducedStiffness r = ReducedStiffness::diagonal(1.0, 1.0, 1.0, 1.0);
  r.Q1(0, 1) = 0.5;
  EXPECT_THROW(r.validate(), InputError);
}
