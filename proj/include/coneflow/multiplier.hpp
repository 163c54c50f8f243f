#ifndef CONEFLOW_MULTIPLIER_HPP
#define CONEFLOW_MULTIPLIER_HPP

// Bilinear multipliers omega_M(x, y) = exp(i <Mx|y>) on R^d, their cohomology
// classes (strictly upper triangular representatives), coboundary witnesses and
// the projective translations they twist.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <string>

#include "coneflow/cone.hpp"
#include "coneflow/error.hpp"
#include "coneflow/fock.hpp"
#include "coneflow/isorep.hpp"

namespace coneflow {

using RealMatrix = Eigen::MatrixXd;

namespace detail {

inline Eigen::Map<const Eigen::VectorXd> as_vector(const RealPoint& x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

inline void require_square(const RealMatrix& m, std::size_t d, const char* what) {
  if (m.rows() != m.cols() || static_cast<std::size_t>(m.rows()) != d)
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " must be " + std::to_string(d) + "x" +
                                                  std::to_string(d));
}

/// <Mx|y> for real vectors.
inline double bilinear(const RealMatrix& m, const RealPoint& x, const RealPoint& y) {
  if (x.size() != y.size()) throw Error(ErrorKind::DimensionMismatch, "points differ in dimension");
  require_square(m, x.size(), "multiplier matrix");
  return (m * as_vector(x)).dot(as_vector(y));
}

inline RealPoint plus(const RealPoint& a, const RealPoint& b) {
  RealPoint r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

}  // namespace detail

/// omega_M(x, y) = e^{i <Mx|y>}.
inline Complex omega_eval(const RealMatrix& m, const RealPoint& x, const RealPoint& y) {
  return std::polar(1.0, detail::bilinear(m, x, y));
}

/// |omega(x,y) omega(x+y,z) - omega(x,y+z) omega(y,z)|.
inline double cocycle_residual(const RealMatrix& m, const RealPoint& x, const RealPoint& y, const RealPoint& z) {
  const Complex lhs = omega_eval(m, x, y) * omega_eval(m, detail::plus(x, y), z);
  const Complex rhs = omega_eval(m, x, detail::plus(y, z)) * omega_eval(m, y, z);
  return std::abs(lhs - rhs);
}

/// psi(x) = e^{(i/2) <Qx|x>} with Q symmetric; its coboundary is e^{-i <Qx|y>}.
struct CoboundaryWitness {
  RealMatrix q;

  Complex psi(const RealPoint& x) const { return std::polar(1.0, 0.5 * detail::bilinear(q, x, x)); }

  /// psi(x) psi(y) / psi(x + y), evaluated in closed form.
  Complex coboundary(const RealPoint& x, const RealPoint& y) const { return std::polar(1.0, -detail::bilinear(q, x, y)); }
};

struct ClassRepresentative {
  RealMatrix t;  // strictly upper triangular
  CoboundaryWitness witness;
};

inline bool is_strictly_upper(const RealMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j <= std::min(i, m.cols() - 1); ++j)
      if (m(i, j) != 0.0) return false;
  return true;
}

/// Cohomology class of omega_M: T_ij = (M - M^T)_ij for i < j, witness Q = T - M, so
/// that omega_M = omega_T * omega_psi exactly.
inline ClassRepresentative class_rep(const RealMatrix& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::DimensionMismatch, "multiplier matrix must be square");
  const Eigen::Index d = m.rows();
  RealMatrix t = RealMatrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) t(i, j) = m(i, j) - m(j, i);
  RealMatrix q = t - m;
  // Q is symmetric in exact arithmetic; remove rounding asymmetry.
  q = 0.5 * (q + q.transpose()).eval();
  return {std::move(t), CoboundaryWitness{std::move(q)}};
}

/// |omega_M(x,y) - omega_T(x,y) e^{-i <Qx|y>}|.
inline double coboundary_residual(const RealMatrix& m, const RealMatrix& t, const RealMatrix& q, const RealPoint& x,
                                  const RealPoint& y) {
  return std::abs(omega_eval(m, x, y) - omega_eval(t, x, y) * CoboundaryWitness{q}.coboundary(x, y));
}

/// Twisted shift on the orthant: (V_x f)(y) = omega_M(x delta, (y-x) delta) f(y - x).
inline SparseState twisted_shift_apply(const GridRep& rep, const RealMatrix& m, const Cell& x, const SparseState& f) {
  if (rep.summands().size() != 1 ||
      !std::holds_alternative<OrthantModule>(rep.summand(0).module.variant()))
    throw Error(ErrorKind::InvalidArgument, "twisted shifts are defined on the full orthant");
  detail::require_lattice_step(rep, x);
  detail::require_attached(rep, f);
  const RealPoint xr = rep.cone().embed(x);
  SparseState out(rep.space());
  for (const auto& [site, value] : f.entries())
    out.set(Site{site.summand, add(site.cell, x), site.fiber}, omega_eval(m, xr, rep.cone().embed(site.cell)) * value);
  return out;
}

/// Finitely supported functions on the full lattice Z^d.
using LatticeState = OneParticleVector<Cell>;

inline SpacePtr lattice_space(const ConeSpec& cone) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "Z^%d @delta=%.17g", cone.d, cone.delta);
  return make_space(buf, cone.cell_weight());
}

/// U_x f(y) = omega_M(x delta, (y - x) delta) f(y - x) on the full lattice.
inline LatticeState phase_translate_apply(const ConeSpec& cone, const RealMatrix& m, const Cell& x,
                                          const LatticeState& f) {
  require_dim(cone, x);
  const RealPoint xr = cone.embed(x);
  LatticeState out(f.space() ? f.space() : lattice_space(cone));
  for (const auto& [cell, value] : f.entries()) out.set(add(cell, x), omega_eval(m, xr, cone.embed(cell)) * value);
  return out;
}

/// U_x^* g(z) = conj(omega_M(x delta, z delta)) g(z + x).
inline LatticeState phase_translate_adjoint_apply(const ConeSpec& cone, const RealMatrix& m, const Cell& x,
                                                  const LatticeState& g) {
  require_dim(cone, x);
  const RealPoint xr = cone.embed(x);
  LatticeState out(g.space() ? g.space() : lattice_space(cone));
  for (const auto& [cell, value] : g.entries()) {
    const Cell z = sub(cell, x);
    out.set(z, std::conj(omega_eval(m, xr, cone.embed(z))) * value);
  }
  return out;
}

}  // namespace coneflow

#endif  // CONEFLOW_MULTIPLIER_HPP
