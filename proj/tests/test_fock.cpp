#include <gtest/gtest.h>

#include <cmath>

#include "coneflow/fock.hpp"
#include "coneflow/isorep.hpp"
#include "coneflow/random.hpp"
#include "test_support.hpp"

namespace coneflow {
namespace {

using Vec = OneParticleVector<int>;
using Fock = FockVector<int>;

const SpacePtr kSpace = make_space("C^4");

Vec mass(int cell, Complex value = 1.0) { return Vec::delta(kSpace, cell, value); }

TEST(ExpInner, Examples) {
  const Vec zero(kSpace);
  EXPECT_EQ(exp_inner(zero, zero), Complex(1.0));
  EXPECT_NEAR(std::abs(exp_inner(mass(0), mass(0)) - std::exp(1.0)), 0.0, 1e-15);
  const Complex z = exp_inner(mass(0), mass(0, Complex(0, 1)));
  EXPECT_NEAR(z.real(), 0.540302, 1e-6);
  EXPECT_NEAR(z.imag(), 0.841471, 1e-6);
}

TEST(ExpInner, AntilinearInFirstSlot) {
  EXPECT_NEAR(std::abs(inner(mass(0, Complex(0, 1)), mass(0)) - Complex(0, -1)), 0.0, 1e-15);
}

TEST(ExpInner, Errors) {
  const Vec other = Vec::delta(make_space("C^5"), 0);
  try {
    exp_inner(mass(0), other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SpaceMismatch);
  }
  try {
    exp_inner(mass(0, 20.0), mass(0, 20.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ExponentOverflow);
  }
}

TEST(FockInner, Examples) {
  const Fock vac = Fock::vacuum(kSpace);
  EXPECT_EQ(fock_inner(vac, vac), Complex(1.0));

  const Fock zero = Fock::exponential(mass(1)) - Fock::exponential(mass(1));
  EXPECT_TRUE(zero.is_zero());
  EXPECT_EQ(fock_inner(zero, vac), Complex(0.0));

  const Fock psi = Fock::exponential(mass(0)) + Fock::exponential(mass(1));
  // 2x2 Gram sum: e^{<u|u>} + e^{<u|v>} + e^{<v|u>} + e^{<v|v>}
  const double gram = std::exp(1.0) + std::exp(0.0) + std::exp(0.0) + std::exp(1.0);
  EXPECT_NEAR(fock_inner(psi, psi).real(), gram, 1e-12);
  EXPECT_NEAR(gram, 7.436564, 1e-6);
}

TEST(Weyl, Examples) {
  const Fock psi = Fock::exponential(mass(2, Complex(0.3, -0.2))) + Fock::exponential(mass(3));
  const Fock same = weyl_apply(Vec(kSpace), psi);
  EXPECT_EQ(same.size(), psi.size());
  EXPECT_LT(fock_distance(same, psi), 1e-15);

  const Fock moved = weyl_apply(mass(0), Fock::vacuum(kSpace));
  ASSERT_EQ(moved.size(), 1u);
  EXPECT_NEAR(std::abs(moved.terms()[0].coef - std::exp(-0.5)), 0.0, 1e-15);
  EXPECT_NEAR(std::exp(-0.5), 0.606531, 1e-6);
  EXPECT_EQ(moved.terms()[0].arg, mass(0));
}

TEST(Weyl, CcrSpotCheck) {
  const Vec u = mass(0);
  const Vec v = mass(0, Complex(0, 1));
  EXPECT_NEAR(inner(u, v).imag(), 1.0, 1e-15);
  const Fock vac = Fock::vacuum(kSpace);
  const Fock lhs = weyl_apply(u, weyl_apply(v, vac));
  const Fock rhs = std::exp(Complex(0, -1)) * weyl_apply(u + v, vac);
  EXPECT_LE(fock_distance(lhs, rhs), 1e-12);
}

TEST(Ccr, ResidualExamples) {
  Rng rng(5);
  const auto rep = testing::rep2("orthant:2");
  const Box box = default_box(rep.summand(0).module, 4);
  std::vector<GridFockVector> tests;
  for (int i = 0; i < 20; ++i) tests.push_back(random_fock_vector(rng, rep, box));
  const SparseState zero(rep.space());
  const SparseState v = random_argument(rng, rep, box, 3, 2.0);
  EXPECT_LE(ccr_residual(zero, v, tests), 1e-12);
  EXPECT_LE(ccr_residual(v, v, tests), 1e-12);
  for (int trial = 0; trial < 20; ++trial) {
    const SparseState a = random_argument(rng, rep, box, 4, 2.0);
    const SparseState b = random_argument(rng, rep, box, 4, 2.0);
    EXPECT_LE(ccr_residual(a, b, tests), 1e-9);
  }
}

TEST(Gamma, Examples) {
  const Fock psi = Fock::exponential(mass(0, 0.5)) + Fock::exponential(mass(1, Complex(0, 1)), 2.0);
  const Fock same = gamma_apply([](const Vec& v) { return v; }, psi);
  EXPECT_LT(fock_distance(same, psi), 1e-15);

  const auto swap = [](const Vec& v) {
    Vec out(v.space());
    for (const auto& [k, z] : v.entries()) out.add(3 - k, z);
    return out;
  };
  const Fock vac = Fock::vacuum(kSpace);
  EXPECT_LT(fock_distance(gamma_apply(swap, vac), vac), 1e-15);

  const auto rep = testing::rep2("orthant:2");
  const GridFockVector e = GridFockVector::exponential(basis_state(rep, {0, 0}));
  const GridFockVector shifted = gamma_apply([&](const SparseState& v) { return shift_apply(rep, {1, 0}, v); }, e);
  ASSERT_EQ(shifted.size(), 1u);
  EXPECT_EQ(shifted.terms()[0].arg, basis_state(rep, {1, 0}));
}

TEST(Gamma, RejectsNonIsometry) {
  const Fock psi = Fock::exponential(mass(0));
  try {
    gamma_apply([](const Vec& v) { return Complex(2.0) * v; }, psi);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotIsometricOnSupport);
  }
}

TEST(TensorSplit, Examples) {
  auto side = [](int k) -> std::optional<int> {
    if (k < 0 || k > 3) return std::nullopt;
    return k < 2 ? 0 : 1;
  };
  const SplitVector<int> vac = tensor_split(Fock::vacuum(kSpace), side);
  ASSERT_EQ(vac.terms.size(), 1u);
  EXPECT_TRUE(vac.terms[0].left.is_zero());
  EXPECT_TRUE(vac.terms[0].right.is_zero());

  const SplitVector<int> left_only = tensor_split(Fock::exponential(mass(1)), side);
  EXPECT_EQ(left_only.terms[0].left, mass(1));
  EXPECT_TRUE(left_only.terms[0].right.is_zero());

  const SpacePtr wide = make_space("C^6");
  try {
    tensor_split(Fock::exponential(Vec::delta(wide, 5)), side);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadPartition);
  }
}

TEST(TensorSplitProperty, PreservesInnerProducts) {
  Rng rng(17);
  auto side = [](int k) -> std::optional<int> { return k % 2; };
  auto random_vec = [&] {
    Vec v(kSpace);
    for (int k = 0; k < 4; ++k) v.add(k, rng.complex(0.6));
    return v;
  };
  for (int trial = 0; trial < 50; ++trial) {
    const Fock a = Fock::exponential(random_vec(), rng.complex()) + Fock::exponential(random_vec(), rng.complex());
    const Fock b = Fock::exponential(random_vec(), rng.complex());
    const Complex before = fock_inner(a, b);
    const Complex after = split_inner(tensor_split(a, side), tensor_split(b, side));
    EXPECT_LE(std::abs(before - after), 1e-12 * std::max(1.0, std::abs(before)));
  }
}

class FockProperty : public ::testing::Test {
 protected:
  GridRep rep = testing::rep2("staircase:-1,1");
  Box box = default_box(rep.summand(0).module, 4);
  Rng rng{23};
};

TEST_F(FockProperty, GramIsPositiveSemidefinite) {
  for (int trial = 0; trial < 100; ++trial) {
    GridFockVector psi = random_fock_vector(rng, rep, box);
    psi -= random_fock_vector(rng, rep, box);
    const Complex g = fock_inner(psi, psi);
    EXPECT_GE(g.real(), -1e-9);
    EXPECT_LE(std::abs(g.imag()), 1e-9);
  }
}

TEST_F(FockProperty, WeylIsUnitaryWithInverseAtMinusU) {
  for (int trial = 0; trial < 50; ++trial) {
    const SparseState u = random_argument(rng, rep, box, 3, 1.5);
    const GridFockVector psi = random_fock_vector(rng, rep, box);
    const GridFockVector phi = random_fock_vector(rng, rep, box);
    const double n0 = fock_norm(psi);
    EXPECT_LE(std::abs(fock_norm(weyl_apply(u, psi)) - n0), 1e-9 * n0);
    const Complex lhs = fock_inner(weyl_apply(u, psi), phi);
    const Complex rhs = fock_inner(psi, weyl_apply(-u, phi));
    EXPECT_LE(std::abs(lhs - rhs), 1e-9 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_F(FockProperty, GammaIsMultiplicativeOnShifts) {
  for (int trial = 0; trial < 30; ++trial) {
    const Cell x{rng.integer(0, 3), rng.integer(0, 3)};
    const Cell y{rng.integer(0, 3), rng.integer(0, 3)};
    const GridFockVector psi = random_fock_vector(rng, rep, box);
    auto shift = [&](const Cell& s) { return [&, s](const SparseState& v) { return shift_apply(rep, s, v); }; };
    const GridFockVector lhs = gamma_apply(shift(x), gamma_apply(shift(y), psi));
    const GridFockVector rhs = gamma_apply(shift(add(x, y)), psi);
    ASSERT_EQ(lhs.size(), rhs.size());
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      EXPECT_EQ(lhs.terms()[i].coef, rhs.terms()[i].coef);
      EXPECT_EQ(lhs.terms()[i].arg, rhs.terms()[i].arg);
    }
  }
}

TEST_F(FockProperty, GammaConjugatesWeyl) {
  for (int trial = 0; trial < 30; ++trial) {
    const Cell x{rng.integer(0, 3), rng.integer(0, 3)};
    const SparseState v = random_argument(rng, rep, box, 3, 1.5);
    const GridFockVector psi = random_fock_vector(rng, rep, box);
    auto shift = [&](const SparseState& w) { return shift_apply(rep, x, w); };
    const GridFockVector lhs = gamma_apply(shift, weyl_apply(v, psi));
    const GridFockVector rhs = weyl_apply(shift(v), gamma_apply(shift, psi));
    EXPECT_LE(fock_distance(lhs, rhs), 1e-9);
  }
}

TEST(FockDistance, IdentifiesRoundingLevelArguments) {
  const Vec a = mass(0, 0.1) + mass(1, 0.7);
  Vec b = a;
  b.set(1, 0.7 + 1e-16);
  const Fock diff_source = Fock::exponential(a, 3.0);
  const Fock other = Fock::exponential(b, 3.0);
  EXPECT_LE(fock_distance(diff_source, other), 1e-13);
  EXPECT_GT(fock_distance(diff_source, Fock::exponential(mass(0, 0.1) + mass(1, 0.8), 3.0)), 1e-2);
}

}  // namespace
}  // namespace coneflow
