#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "coneflow/cocycle.hpp"
#include "coneflow/intertwiner.hpp"
#include "coneflow/random.hpp"
#include "test_support.hpp"

namespace coneflow {
namespace {

using ::coneflow::testing::rep1;
using ::coneflow::testing::rep2;

// Kernel dimension of the cocycle equations written with the compressed shift matrices:
// V_i^* h_i = 0 and (1 - V_j) h_i = (1 - V_i) h_j, h_i supported on the core.
int oracle_cocycle_dim(const GridRep& rep, int extent) {
  std::vector<Box> boxes;
  for (const auto& s : rep.summands()) {
    Box b = default_box(s.module, extent);
    for (int& v : b.lo) v -= 1;
    for (int& v : b.hi) v += 1;
    boxes.push_back(b);
  }
  const CompressedRep c = compress(rep, boxes);
  std::vector<int> core;
  for (int p = 0; p < c.size(); ++p) {
    const Site& s = c.sites[p];
    if (default_box(rep.summand(s.summand).module, extent).contains(s.cell)) core.push_back(p);
  }
  const int n = c.size();
  const int nc = static_cast<int>(core.size());
  const int d = rep.d();
  Eigen::MatrixXd embed = Eigen::MatrixXd::Zero(n, nc);
  for (int k = 0; k < nc; ++k) embed(core[k], k) = 1.0;
  const int blocks = d + d * (d - 1) / 2;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(blocks * n, d * nc);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  int row = 0;
  for (int i = 0; i < d; ++i, row += n) a.block(row, i * nc, n, nc) = c.step_matrices[i].real().transpose() * embed;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j, row += n) {
      a.block(row, i * nc, n, nc) = (id - c.step_matrices[j].real()) * embed;
      a.block(row, j * nc, n, nc) = -(id - c.step_matrices[i].real()) * embed;
    }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-10);
  return static_cast<int>(lu.dimensionOfKernel());
}

AdditiveCocycle canonical1(const GridRep& rep, Complex scale = 1.0) {
  return AdditiveCocycle(rep, {basis_state(rep, Site{0, {0}, 0}, scale)});
}

// h_i = g - V_{e_i} g is flat for any g but usually leaks out of ker V_{e_i}^*.
AdditiveCocycle coboundary(const GridRep& rep, const SparseState& g) {
  std::vector<SparseState> gens;
  for (int i = 0; i < rep.d(); ++i) gens.push_back(g - shift_apply(rep, unit_step(rep.d(), i), g));
  return AdditiveCocycle(rep, gens);
}

TEST(SolveCocycles, Dimensions) {
  for (int k = 1; k <= 3; ++k)
    for (int extent : {8, 10, 12}) {
      const auto rep = rep1(k);
      const CocycleSolution sol = solve_cocycles(rep, SolveRegion::natural(rep, extent));
      EXPECT_EQ(sol.dimension, k);
      EXPECT_LE(sol.kernel_residual, 1e-10);
      EXPECT_LE(sol.flatness_residual, 1e-10);
    }
  for (const char* text : {"orthant:2", "axis:-,+", "staircase:-1,1", "staircase:-2,1", "section:-1", "section:-2",
                           "translate(staircase:-1,1;1,1)"})
    for (int extent : {5, 6, 7}) {
      const auto rep = rep2(text);
      EXPECT_EQ(solve_cocycles(rep, SolveRegion::natural(rep, extent)).dimension, 0) << text << " " << extent;
    }
}

TEST(SolveCocycles, AgreesWithDenseOracle) {
  for (int k = 1; k <= 2; ++k) {
    const auto rep = rep1(k);
    EXPECT_EQ(solve_cocycles(rep, SolveRegion::natural(rep, 8)).dimension, oracle_cocycle_dim(rep, 8));
  }
  for (const char* text : {"orthant:2", "axis:-,+", "staircase:-1,1", "section:-1"}) {
    const auto rep = rep2(text, 2);
    EXPECT_EQ(solve_cocycles(rep, SolveRegion::natural(rep, 5)).dimension, oracle_cocycle_dim(rep, 5)) << text;
  }
  const auto three = GridRep(ConeSpec(3, 1.0), ModuleDescriptor::orthant(3), 1);
  EXPECT_EQ(solve_cocycles(three, SolveRegion::natural(three, 4)).dimension, oracle_cocycle_dim(three, 4));
}

TEST(SolveCocycles, BasisElementsAreCocycles) {
  const auto rep = rep1(3);
  const CocycleSolution sol = solve_cocycles(rep, SolveRegion::natural(rep, 10));
  ASSERT_EQ(sol.basis.size(), 3u);
  for (const auto& h : sol.basis) {
    EXPECT_LE(h.kernel_residual(), 1e-10);
    EXPECT_LE(h.flatness_residual(), 1e-10);
    EXPECT_FALSE(h.is_zero());
  }
}

TEST(SolveCocycles, DirectSumIsAdditive) {
  const auto a = rep1(1);
  const auto b = rep1(2);
  const auto sum = GridRep::direct_sum(a, b);
  const int da = solve_cocycles(a, SolveRegion::natural(a, 8)).dimension;
  const int db = solve_cocycles(b, SolveRegion::natural(b, 8)).dimension;
  EXPECT_EQ(solve_cocycles(sum, SolveRegion::natural(sum, 8)).dimension, da + db);
  const auto two = GridRep::direct_sum(rep2("orthant:2"), rep2("staircase:-1,1"));
  EXPECT_EQ(solve_cocycles(two, SolveRegion::natural(two, 5)).dimension, 0);
}

TEST(SolveCocycles, RejectsBadRegions) {
  const auto rep = rep2("orthant:2");
  try {
    solve_cocycles(rep, SolveRegion{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadRegion);
  }
  try {
    solve_cocycles(rep, SolveRegion::natural(rep, 4, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadRegion);
  }
}

TEST(CocycleValue, Examples) {
  const auto rep = rep1();
  const AdditiveCocycle h = canonical1(rep);
  EXPECT_TRUE(cocycle_value(h, Cell{0}).is_zero());
  SparseState expected(rep.space());
  for (int n = 0; n < 3; ++n) expected.add(Site{0, {n}, 0}, 1.0);
  EXPECT_EQ(cocycle_value(h, Cell{3}), expected);

  const auto rep_2 = rep2("orthant:2");
  SparseState bad(rep_2.space());
  bad.add(Site{0, {0, 0}, 0}, 1.0);
  const AdditiveCocycle not_flat(rep_2, {bad, SparseState(rep_2.space())});
  try {
    cocycle_value(not_flat, {1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotACocycle);
  }
}

TEST(CocycleValue, PathIndependentAndMatchesClosedForm) {
  Rng rng(31);
  const auto rep = rep2("orthant:2", 2);
  const Box box = default_box(rep.summand(0).module, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const SparseState g = random_state(rng, rep, box, 4, 1.0);
    const AdditiveCocycle h = coboundary(rep, g);
    EXPECT_LE(h.flatness_residual(), 1e-12);
    const Cell x{rng.integer(0, 4), rng.integer(0, 4)};
    const SparseState ab = cocycle_value_along(h, x, {0, 1});
    const SparseState ba = cocycle_value_along(h, x, {1, 0});
    EXPECT_LE(detail::max_abs(ab - ba), 1e-12);
    EXPECT_LE(detail::max_abs(ab - (g - shift_apply(rep, x, g))), 1e-12);
  }
}

TEST(CocycleValue, AdditiveAlongTheFlow) {
  const auto rep = rep1(2);
  const CocycleSolution sol = solve_cocycles(rep, SolveRegion::natural(rep, 8));
  AdditiveCocycle h = sol.basis[0];
  h += Complex(0.0, 2.0) * sol.basis[1];
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y) {
      const SparseState lhs = cocycle_value(h, Cell{x + y});
      const SparseState rhs = cocycle_value(h, Cell{x}) + shift_apply(rep, Cell{x}, cocycle_value(h, Cell{y}));
      EXPECT_LE(detail::max_abs(lhs - rhs), 1e-12);
    }
}

TEST(Slope, Examples) {
  const auto rep = rep1();
  const LinearFit fit = slope(canonical1(rep), {{1}, {2}, {3}});
  ASSERT_EQ(fit.coef.size(), 1u);
  EXPECT_NEAR(fit.coef[0], 1.0, 1e-12);
  EXPECT_LE(fit.residual, 1e-12);

  const auto fine = rep1(1, 0.25);
  EXPECT_NEAR(slope(canonical1(fine, 3.0), {{1}, {4}}).coef[0], 9.0, 1e-12);

  const ComplexLinearFit c = pairing_c(canonical1(rep), canonical1(rep, Complex(0, 1)), {{1}, {2}});
  EXPECT_NEAR(std::abs(c.coef[0] - Complex(0, 1)), 0.0, 1e-12);
  try {
    slope(canonical1(rep), {{0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateSample);
  }
  const auto rep_2 = rep2("orthant:2");
  try {
    slope(AdditiveCocycle(rep_2), {{1, 1}, {2, 2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateSample);
  }
}

TEST(Units, Examples) {
  const auto rep = rep2("orthant:2");
  const Unit u{{1.0, 0.0}, AdditiveCocycle(rep)};
  const GridFockVector vac = GridFockVector::vacuum(rep.space());
  const GridFockVector out = unit_apply(u, {2, 0}, vac);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(std::abs(out.terms()[0].coef - std::exp(2.0)), 0.0, 1e-12);
  EXPECT_NEAR(std::exp(2.0), 7.389056, 1e-6);
  EXPECT_TRUE(out.terms()[0].arg.is_zero());

  EXPECT_LE(fock_distance(unit_apply(Unit::canonical(rep), {3, 1}, vac), vac), 0.0);

  const auto line = rep1();
  const Unit c{{0.0}, canonical1(line)};
  const GridFockVector img = unit_apply(c, Cell{2}, GridFockVector::vacuum(line.space()));
  ASSERT_EQ(img.size(), 1u);
  EXPECT_EQ(img.terms()[0].arg, basis_state(line, Cell{0}) + basis_state(line, Cell{1}));
}

TEST(Units, RejectsLeakyCocycle) {
  const auto rep = rep2("orthant:2");
  const AdditiveCocycle h = coboundary(rep, basis_state(rep, {1, 1}));
  try {
    unit_apply(Unit{{0.0, 0.0}, h}, {1, 0}, GridFockVector::vacuum(rep.space()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotACocycle);
  }
}

TEST(Units, SemigroupAndIntertwining) {
  Rng rng(41);
  const auto rep = rep1(2);
  const CocycleSolution sol = solve_cocycles(rep, SolveRegion::natural(rep, 8));
  AdditiveCocycle h = sol.basis[0];
  h += Complex(0.3, -0.4) * sol.basis[1];
  const Unit u{{Complex(0.2, 0.5)}, h};
  const Box box = default_box(rep.summand(0).module, 5);
  std::vector<UnitTestVector> tests;
  for (int i = 0; i < 10; ++i)
    tests.push_back({random_argument(rng, rep, box, 3, 1.0), random_fock_vector(rng, rep, box)});
  for (int x = 0; x <= 3; ++x)
    for (int y = 0; y <= 3; ++y) {
      const UnitResiduals r = unit_residuals(u, Cell{x}, Cell{y}, tests);
      EXPECT_LE(r.semigroup, 1e-9);
      EXPECT_LE(r.intertwine, 1e-9);
    }

  // A flat but leaky h keeps the semigroup law and breaks the intertwining.
  const AdditiveCocycle leaky = coboundary(rep, basis_state(rep, Cell{1}));
  const std::vector<UnitTestVector> probe{{basis_state(rep, Cell{0}), GridFockVector::vacuum(rep.space())}};
  const UnitResiduals bad = unit_residuals(Unit{{0.0}, leaky}, Cell{1}, Cell{1}, probe);
  EXPECT_LE(bad.semigroup, 1e-9);
  EXPECT_GT(bad.intertwine, 1e-3);
}

TEST(Units, OmegaTwistedProduct) {
  Rng rng(43);
  const auto rep = rep2("orthant:2");
  const RealMatrix m = (RealMatrix(2, 2) << 0.0, 1.0, 0.0, 0.0).finished();
  const Box box = default_box(rep.summand(0).module, 4);
  const SpacePtr lattice = lattice_space(rep.cone());
  std::vector<OmegaUnitTestVector> tests;
  for (int i = 0; i < 8; ++i) {
    LatticeState f(lattice);
    for (int k = 0; k < 3; ++k) f.add({rng.integer(-3, 3), rng.integer(-3, 3)}, rng.complex());
    tests.push_back({random_fock_vector(rng, rep, box), f});
  }
  for (int trial = 0; trial < 20; ++trial) {
    const Cell x{rng.integer(0, 3), rng.integer(0, 3)};
    const Cell y{rng.integer(0, 3), rng.integer(0, 3)};
    EXPECT_LE(omega_unit_residual(rep, m, x, y, tests), 1e-9);
  }
  EXPECT_GT(omega_unit_residual(rep, m, {0, 1}, {1, 0}, tests, false), 1e-3);
}

TEST(Flow, ActsOnWeylOperatorsByShifting) {
  Rng rng(47);
  for (const char* text : {"orthant:2", "staircase:-1,1", "section:-2"}) {
    const auto rep = rep2(text);
    const Box box = default_box(rep.summand(0).module, 4);
    for (int trial = 0; trial < 15; ++trial) {
      const Cell x{rng.integer(0, 3), rng.integer(0, 3)};
      const SparseState w = random_argument(rng, rep, box, 3, 1.5);
      const GridFockVector psi = random_fock_vector(rng, rep, box);
      const GridFockVector lhs = flow_apply(rep, x, [&](const GridFockVector& v) { return weyl_apply(w, v); }, psi);
      const GridFockVector rhs = weyl_apply(shift_apply(rep, x, w), psi);
      EXPECT_LE(fock_distance(lhs, rhs), 1e-9) << text;
    }
  }
}

TEST(Flow, VacuumIsInvariant) {
  Rng rng(53);
  const auto rep = rep2("staircase:-1,1", 2);
  const Box box = default_box(rep.summand(0).module, 4);
  std::vector<WeylWord> words{{}};
  for (int i = 0; i < 10; ++i) {
    WeylWord w;
    for (int k = 0; k < 3; ++k) w.push_back(random_argument(rng, rep, box, 3, 1.5));
    words.push_back(w);
  }
  std::vector<Cell> xs;
  for (int i = 0; i < 8; ++i) xs.push_back({rng.integer(0, 4), rng.integer(0, 4)});
  EXPECT_LE(invariant_state_residual(rep, words, xs), 1e-12);
  // The canonical unit fixes the vacuum.
  const GridFockVector vac = GridFockVector::vacuum(rep.space());
  for (const Cell& x : xs) EXPECT_LE(fock_distance(unit_apply(Unit::canonical(rep), x, vac), vac), 0.0);
}

}  // namespace
}  // namespace coneflow
