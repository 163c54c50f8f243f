#ifndef CONEFLOW_GAUGE_HPP
#define CONEFLOW_GAUGE_HPP

// Gauge cocycles of a CCR flow: (lambda, h, u0) -> U_x = e^{i<lambda|x>} W(h_x) Gamma(u_x)
// with u_x = u E_x + (1 - E_x), u = 1 (x) u0 acting on fibers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "coneflow/cocycle.hpp"
#include "coneflow/cone.hpp"
#include "coneflow/error.hpp"
#include "coneflow/fock.hpp"
#include "coneflow/isorep.hpp"

namespace coneflow {

inline constexpr double kUnitaryTolerance = 1e-12;

class GaugeElement {
 public:
  GaugeElement(std::vector<double> lambda, AdditiveCocycle h, Eigen::MatrixXcd u0)
      : lambda_(std::move(lambda)), h_(std::move(h)), u0_(std::move(u0)) {
    const GridRep& rep = h_.rep();
    if (static_cast<int>(lambda_.size()) != rep.d()) throw Error(ErrorKind::DimensionMismatch, "lambda has wrong length");
    const auto k = rep.uniform_multiplicity();
    if (!k || u0_.rows() != *k || u0_.cols() != *k)
      throw Error(ErrorKind::RepMismatch, "u0 must be k x k with k the common multiplicity");
    const double defect = (u0_.adjoint() * u0_ - Eigen::MatrixXcd::Identity(*k, *k)).cwiseAbs().maxCoeff();
    if (defect > kUnitaryTolerance)
      throw Error(ErrorKind::NotIsometricOnSupport, "u0 is not unitary (defect " + std::to_string(defect) + ")");
  }

  static GaugeElement identity(const GridRep& rep) {
    const int k = rep.uniform_multiplicity().value_or(1);
    return {std::vector<double>(rep.d(), 0.0), AdditiveCocycle(rep), Eigen::MatrixXcd::Identity(k, k)};
  }

  const std::vector<double>& lambda() const { return lambda_; }
  const AdditiveCocycle& h() const { return h_; }
  const Eigen::MatrixXcd& u0() const { return u0_; }
  const GridRep& rep() const { return h_.rep(); }

 private:
  std::vector<double> lambda_;
  AdditiveCocycle h_;
  Eigen::MatrixXcd u0_;
};

/// (u_x v)(c) = u0 v(c) on sites of ker V_x^*, v(c) elsewhere.
inline SparseState apply_u_x(const GaugeElement& g, const Cell& x, const SparseState& v) {
  const GridRep& rep = g.rep();
  detail::require_lattice_step(rep, x);
  SparseState head(rep.space());
  SparseState out(rep.space());
  for (const auto& [site, value] : v.entries()) {
    if (in_kernel_of_adjoint(rep, x, site))
      head.set(site, value);
    else
      out.set(site, value);
  }
  out += AdditiveCocycle::fiber_apply(g.u0(), head);
  return out;
}

/// U_x psi = e^{i<lambda|x delta>} W(h_x) Gamma(u_x) psi.
inline GridFockVector gauge_apply(const GaugeElement& g, const Cell& x, const GridFockVector& psi) {
  const GridRep& rep = g.rep();
  const RealPoint xr = rep.cone().embed(x);
  double phase = 0.0;
  for (std::size_t i = 0; i < xr.size(); ++i) phase += g.lambda()[i] * xr[i];
  GridFockVector out = gamma_apply([&](const SparseState& v) { return apply_u_x(g, x, v); }, psi);
  out = weyl_apply(cocycle_value(g.h(), x), out);
  return std::polar(1.0, phase) * out;
}

/// max ||U_{x+y} psi - U_x alpha_x(U_y) psi|| over the test set.
inline double cocycle_relation_residual(const GaugeElement& g, const Cell& x, const Cell& y,
                                        const std::vector<GridFockVector>& tests) {
  const GridRep& rep = g.rep();
  auto u_y = [&](const GridFockVector& v) { return gauge_apply(g, y, v); };
  double worst = 0.0;
  for (const auto& psi : tests) {
    const GridFockVector lhs = gauge_apply(g, add(x, y), psi);
    const GridFockVector rhs = gauge_apply(g, x, flow_apply(rep, x, u_y, psi));
    worst = std::max(worst, fock_distance(lhs, rhs));
  }
  return worst;
}

/// Sample used to recover the linear pairing c(h, g): (1,..,1) and (1,..,1) + e_i.
inline std::vector<Cell> pairing_sample(int d) {
  std::vector<Cell> xs{Cell(d, 1)};
  for (int i = 0; i < d; ++i) xs.push_back(add(Cell(d, 1), unit_step(d, i)));
  return xs;
}

enum class PhaseCorrection { Apply, Omit };

/// (lambda, h, u)(mu, g, v) = (lambda + mu - Im c(h, u g), h + u g, u v).
inline GaugeElement gauge_product(const GaugeElement& a, const GaugeElement& b,
                                  PhaseCorrection correction = PhaseCorrection::Apply) {
  require_same_space(a.rep().space(), b.rep().space());
  const AdditiveCocycle ug = b.h().fiber_transform(a.u0());
  std::vector<double> lambda(a.lambda().size());
  for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] = a.lambda()[i] + b.lambda()[i];
  if (correction == PhaseCorrection::Apply && !a.h().is_zero() && !ug.is_zero()) {
    const ComplexLinearFit c = pairing_c(a.h(), ug, pairing_sample(a.rep().d()));
    if (c.residual > 1e-8) throw Error(ErrorKind::NotACocycle, "pairing is not linear: " + std::to_string(c.residual));
    for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] -= c.coef[i].imag();
  }
  return {std::move(lambda), a.h() + ug, a.u0() * b.u0()};
}

/// (lambda, h, u)^{-1} = (-lambda, -u^* h, u^*).
inline GaugeElement gauge_inverse(const GaugeElement& g) {
  std::vector<double> lambda(g.lambda());
  for (double& l : lambda) l = -l;
  const Eigen::MatrixXcd u_star = g.u0().adjoint();
  return {std::move(lambda), Complex(-1.0) * g.h().fiber_transform(u_star), u_star};
}

/// Largest parameter difference between two gauge elements.
inline double parameter_distance(const GaugeElement& a, const GaugeElement& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.lambda().size(); ++i) r = std::max(r, std::abs(a.lambda()[i] - b.lambda()[i]));
  for (int i = 0; i < a.rep().d(); ++i) r = std::max(r, detail::max_abs(a.h().generator(i) - b.h().generator(i)));
  return std::max(r, (a.u0() - b.u0()).cwiseAbs().maxCoeff());
}

}  // namespace coneflow

#endif  // CONEFLOW_GAUGE_HPP
