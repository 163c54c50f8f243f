#ifndef CONEFLOW_COCYCLE_HPP
#define CONEFLOW_COCYCLE_HPP

// Additive cocycles of a shift representation and the units of its CCR flow.
//
// On the lattice an additive cocycle is fixed by its generators h_i = h_{e_i}:
//   kernel:   V_{e_i}^* h_i = 0
//   flatness: h_i + V_{e_i} h_j = h_j + V_{e_j} h_i
// and h_x is recovered by h_{y + e_i} = h_y + V_y h_i along any monotone path.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "coneflow/cone.hpp"
#include "coneflow/error.hpp"
#include "coneflow/fock.hpp"
#include "coneflow/isorep.hpp"
#include "coneflow/multiplier.hpp"

namespace coneflow {

/// Singular values below kRankTolerance * max(sigma_max, 1) count as zero.
inline constexpr double kRankTolerance = 1e-8;
inline constexpr double kCocycleTolerance = 1e-10;

namespace detail {

inline double max_abs(const SparseState& f) {
  double m = 0.0;
  for (const auto& kv : f.entries()) m = std::max(m, std::abs(kv.second));
  return m;
}

}  // namespace detail

class AdditiveCocycle {
 public:
  explicit AdditiveCocycle(GridRep rep) : rep_(std::move(rep)) {
    generators_.assign(rep_.d(), SparseState(rep_.space()));
  }

  AdditiveCocycle(GridRep rep, std::vector<SparseState> generators) : rep_(std::move(rep)), generators_(std::move(generators)) {
    if (static_cast<int>(generators_.size()) != rep_.d())
      throw Error(ErrorKind::DimensionMismatch, "need one generator per lattice direction");
    for (auto& g : generators_) {
      if (g.is_zero() && !g.space()) g = SparseState(rep_.space());
      require_same_space(rep_.space(), g.space());
      for (const auto& kv : g.entries())
        if (!rep_.contains(kv.first)) throw Error(ErrorKind::InvalidArgument, "generator site " + to_string(kv.first) + " outside module");
    }
  }

  const GridRep& rep() const { return rep_; }
  const std::vector<SparseState>& generators() const { return generators_; }
  const SparseState& generator(int i) const { return generators_.at(i); }

  bool is_zero() const {
    return std::all_of(generators_.begin(), generators_.end(), [](const SparseState& g) { return g.is_zero(); });
  }

  /// max_i |V_{e_i}^* h_i|_inf
  double kernel_residual() const {
    double r = 0.0;
    for (int i = 0; i < rep_.d(); ++i)
      r = std::max(r, detail::max_abs(shift_adjoint_apply(rep_, unit_step(rep_.d(), i), generators_[i])));
    return r;
  }

  /// max_{i<j} |h_i + V_{e_i} h_j - h_j - V_{e_j} h_i|_inf
  double flatness_residual() const {
    double r = 0.0;
    const int d = rep_.d();
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        const SparseState lhs = generators_[i] + shift_apply(rep_, unit_step(d, i), generators_[j]);
        const SparseState rhs = generators_[j] + shift_apply(rep_, unit_step(d, j), generators_[i]);
        r = std::max(r, detail::max_abs(lhs - rhs));
      }
    return r;
  }

  AdditiveCocycle& operator+=(const AdditiveCocycle& other) {
    require_same_space(rep_.space(), other.rep_.space());
    for (std::size_t i = 0; i < generators_.size(); ++i) generators_[i] += other.generators_[i];
    return *this;
  }

  AdditiveCocycle& operator*=(Complex z) {
    for (auto& g : generators_) g *= z;
    return *this;
  }

  friend AdditiveCocycle operator+(AdditiveCocycle a, const AdditiveCocycle& b) { return a += b; }
  friend AdditiveCocycle operator*(Complex z, AdditiveCocycle a) { return a *= z; }

  /// Apply a fiber matrix to every generator: (u h)_i = (1 (x) u0) h_i.
  AdditiveCocycle fiber_transform(const Eigen::MatrixXcd& u0) const {
    AdditiveCocycle out(rep_);
    for (std::size_t i = 0; i < generators_.size(); ++i) out.generators_[i] = fiber_apply(u0, generators_[i]);
    return out;
  }

  static SparseState fiber_apply(const Eigen::MatrixXcd& u0, const SparseState& f) {
    SparseState out(f.space());
    for (const auto& [site, value] : f.entries()) {
      if (site.fiber >= u0.cols()) throw Error(ErrorKind::RepMismatch, "fiber matrix too small");
      for (Eigen::Index r = 0; r < u0.rows(); ++r)
        if (u0(r, site.fiber) != Complex{}) out.add(Site{site.summand, site.cell, static_cast<int>(r)}, u0(r, site.fiber) * value);
    }
    return out;
  }

 private:
  GridRep rep_;
  std::vector<SparseState> generators_;
};

/// h_x along the path that exhausts the axes in `axis_order`, without validation.
inline SparseState cocycle_value_along(const AdditiveCocycle& h, const Cell& x, const std::vector<int>& axis_order) {
  const GridRep& rep = h.rep();
  detail::require_lattice_step(rep, x);
  SparseState value(rep.space());
  Cell y = zero_cell(rep.d());
  for (int axis : axis_order) {
    for (int n = 0; n < x[axis]; ++n) {
      value += shift_apply(rep, y, h.generator(axis));
      y[axis] += 1;
    }
  }
  return value;
}

/// h_x; throws NotACocycle when the generators are not flat.
inline SparseState cocycle_value(const AdditiveCocycle& h, const Cell& x) {
  const double flat = h.flatness_residual();
  if (flat > kCocycleTolerance) throw Error(ErrorKind::NotACocycle, "flatness residual " + std::to_string(flat));
  std::vector<int> order(h.rep().d());
  for (int i = 0; i < h.rep().d(); ++i) order[i] = i;
  return cocycle_value_along(h, x, order);
}

/// Lattice site without fiber index.
struct LatticeSite {
  int summand = 0;
  Cell cell;
  auto operator<=>(const LatticeSite&) const = default;
};

/// Generators may be supported on `core`; equations are imposed on `window`.
struct SolveRegion {
  std::set<LatticeSite> core;
  std::set<LatticeSite> window;

  /// Core = module cells inside boxes[s] for summand s; window = the same boxes grown by `margin`.
  static SolveRegion from_boxes(const GridRep& rep, const std::vector<Box>& boxes, int margin = 1) {
    if (boxes.size() != rep.summands().size()) throw Error(ErrorKind::BadRegion, "need one box per summand");
    SolveRegion r;
    for (int s = 0; s < static_cast<int>(boxes.size()); ++s) {
      if (boxes[s].dim() != rep.d()) throw Error(ErrorKind::BadRegion, "box dimension mismatch");
      for (const Cell& c : boxes[s].cells())
        if (rep.contains_cell(s, c)) r.core.insert({s, c});
      for (const Cell& c : boxes[s].grown(margin).cells())
        if (rep.contains_cell(s, c)) r.window.insert({s, c});
    }
    return r;
  }

  static SolveRegion from_box(const GridRep& rep, const Box& box, int margin = 1) {
    return from_boxes(rep, std::vector<Box>(rep.summands().size(), box), margin);
  }

  /// Each summand in its default box of the given extent.
  static SolveRegion natural(const GridRep& rep, int extent, int margin = 1) {
    std::vector<Box> boxes;
    for (const auto& s : rep.summands()) boxes.push_back(default_box(s.module, extent));
    return from_boxes(rep, boxes, margin);
  }

  void validate(const GridRep& rep) const {
    if (core.empty()) throw Error(ErrorKind::BadRegion, "empty core");
    for (const auto& site : core) {
      if (site.summand < 0 || site.summand >= static_cast<int>(rep.summands().size()) ||
          !rep.contains_cell(site.summand, site.cell))
        throw Error(ErrorKind::BadRegion, "core cell " + to_string(site.cell) + " outside module");
      if (!window.count(site)) throw Error(ErrorKind::BadRegion, "core not contained in window");
      for (int i = 0; i < rep.d(); ++i)
        if (!window.count({site.summand, add(site.cell, unit_step(rep.d(), i))}))
          throw Error(ErrorKind::BadRegion, "window misses a unit step of core cell " + to_string(site.cell));
    }
  }
};

struct CocycleSolution {
  std::vector<AdditiveCocycle> basis;
  int dimension = 0;
  int unknowns = 0;
  int equations = 0;
  double kernel_residual = 0.0;
  double flatness_residual = 0.0;
};

/// Null space of the kernel + flatness system for generators supported on the core.
inline CocycleSolution solve_cocycles(const GridRep& rep, const SolveRegion& region) {
  region.validate(rep);
  const int d = rep.d();

  // unknown (axis, site, fiber) -> column
  std::map<std::pair<int, Site>, int> column;
  std::vector<std::pair<int, Site>> unknowns;
  for (int i = 0; i < d; ++i)
    for (const auto& ls : region.core)
      for (int f = 0; f < rep.summand(ls.summand).multiplicity; ++f) {
        Site s{ls.summand, ls.cell, f};
        column.emplace(std::make_pair(i, s), static_cast<int>(unknowns.size()));
        unknowns.emplace_back(i, std::move(s));
      }
  auto col = [&](int axis, const Site& s) -> std::optional<int> {
    auto it = column.find({axis, s});
    if (it == column.end()) return std::nullopt;
    return it->second;
  };

  std::vector<std::vector<std::pair<int, double>>> rows;
  // V_{e_i}^* h_i = 0: h_i(c) = 0 whenever c - e_i lies in the module.
  for (const auto& [axis, site] : unknowns)
    if (rep.contains_cell(site.summand, sub(site.cell, unit_step(d, axis))))
      rows.push_back({{*col(axis, site), 1.0}});
  // Flatness evaluated at every window site.
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      for (const auto& ls : region.window)
        for (int f = 0; f < rep.summand(ls.summand).multiplicity; ++f) {
          std::map<int, double> row;
          auto term = [&](int axis, const Cell& cell, double coef) {
            if (!rep.contains_cell(ls.summand, cell)) return;
            if (auto c = col(axis, Site{ls.summand, cell, f})) row[*c] += coef;
          };
          term(i, ls.cell, 1.0);
          term(j, sub(ls.cell, unit_step(d, i)), 1.0);
          term(j, ls.cell, -1.0);
          term(i, sub(ls.cell, unit_step(d, j)), -1.0);
          std::erase_if(row, [](const auto& kv) { return kv.second == 0.0; });
          if (!row.empty()) rows.emplace_back(row.begin(), row.end());
        }

  const int n = static_cast<int>(unknowns.size());
  const int m = static_cast<int>(rows.size());
  Eigen::MatrixXd null_basis;
  if (m == 0) {
    null_basis = Eigen::MatrixXd::Identity(n, n);
  } else {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n);
    for (int r = 0; r < m; ++r)
      for (const auto& [c, v] : rows[r]) a(r, c) = v;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cutoff = kRankTolerance * std::max(sv.size() ? sv(0) : 0.0, 1.0);
    int rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
      if (sv(k) > cutoff) ++rank;
    null_basis = svd.matrixV().rightCols(n - rank);
  }

  CocycleSolution out;
  out.unknowns = n;
  out.equations = m;
  out.dimension = static_cast<int>(null_basis.cols());
  for (Eigen::Index b = 0; b < null_basis.cols(); ++b) {
    std::vector<SparseState> gens(d, SparseState(rep.space()));
    for (int c = 0; c < n; ++c)
      if (null_basis(c, b) != 0.0) gens[unknowns[c].first].add(unknowns[c].second, null_basis(c, b));
    AdditiveCocycle h(rep, std::move(gens));
    out.kernel_residual = std::max(out.kernel_residual, h.kernel_residual());
    out.flatness_residual = std::max(out.flatness_residual, h.flatness_residual());
    out.basis.push_back(std::move(h));
  }
  return out;
}

struct LinearFit {
  std::vector<double> coef;
  double residual = 0.0;
};

struct ComplexLinearFit {
  std::vector<Complex> coef;
  double residual = 0.0;
};

namespace detail {

inline Eigen::MatrixXd sample_matrix(const ConeSpec& cone, const std::vector<Cell>& xs) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()), cone.d);
  for (std::size_t r = 0; r < xs.size(); ++r) {
    require_dim(cone, xs[r]);
    const RealPoint p = cone.embed(xs[r]);
    for (int c = 0; c < cone.d; ++c) x(static_cast<Eigen::Index>(r), c) = p[c];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (static_cast<int>(xs.size()) < cone.d || qr.rank() < cone.d)
    throw Error(ErrorKind::DegenerateSample, "sample points do not span R^" + std::to_string(cone.d));
  return x;
}

inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double& residual) {
  Eigen::VectorXd c = x.colPivHouseholderQr().solve(y);
  residual = std::max(residual, (x * c - y).cwiseAbs().maxCoeff());
  return c;
}

}  // namespace detail

/// Fit ||h_x||^2 = <mu | x delta> over the sample.
inline LinearFit slope(const AdditiveCocycle& h, const std::vector<Cell>& xs) {
  const Eigen::MatrixXd x = detail::sample_matrix(h.rep().cone(), xs);
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) y(r) = norm_sq(cocycle_value(h, xs[r]));
  LinearFit fit;
  const Eigen::VectorXd mu = detail::least_squares(x, y, fit.residual);
  fit.coef.assign(mu.data(), mu.data() + mu.size());
  return fit;
}

/// Fit <h_x | g_x> = <x delta | c> over the sample.
inline ComplexLinearFit pairing_c(const AdditiveCocycle& h, const AdditiveCocycle& g, const std::vector<Cell>& xs) {
  require_same_space(h.rep().space(), g.rep().space());
  const Eigen::MatrixXd x = detail::sample_matrix(h.rep().cone(), xs);
  Eigen::VectorXd re(x.rows());
  Eigen::VectorXd im(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Complex p = inner(cocycle_value(h, xs[r]), cocycle_value(g, xs[r]));
    re(r) = p.real();
    im(r) = p.imag();
  }
  ComplexLinearFit fit;
  double res_re = 0.0;
  double res_im = 0.0;
  const Eigen::VectorXd cr = detail::least_squares(x, re, res_re);
  const Eigen::VectorXd ci = detail::least_squares(x, im, res_im);
  fit.residual = std::hypot(res_re, res_im);
  for (Eigen::Index i = 0; i < cr.size(); ++i) fit.coef.emplace_back(cr(i), ci(i));
  return fit;
}

/// Gamma(V_x).
inline GridFockVector gamma_shift(const GridRep& rep, const Cell& x, const GridFockVector& psi) {
  return gamma_apply([&](const SparseState& v) { return shift_apply(rep, x, v); }, psi);
}

/// alpha_x(T) psi for an operator T given by its action on Fock vectors:
/// e(w) = e(E_x w) (x) e(V_x^* w)  ->  e(E_x w) (x) Gamma(V_x) T e(V_x^* w).
template <class Operator>
GridFockVector flow_apply(const GridRep& rep, const Cell& x, const Operator& op, const GridFockVector& psi) {
  GridFockVector out(rep.space());
  for (const auto& t : psi.terms()) {
    const SparseState head = kernel_projection(rep, x, t.arg);
    const SparseState tail = shift_adjoint_apply(rep, x, t.arg);
    const GridFockVector image = op(GridFockVector::exponential(tail));
    for (const auto& s : image.terms()) out.add_term(t.coef * s.coef, head + shift_apply(rep, x, s.arg));
  }
  out.normalize();
  return out;
}

/// T^{mu,h}_x = e^{<x, mu>} R^{e(h_x)}: e(v) -> e^{<x delta, mu>} e(h_x + V_x v).
struct Unit {
  std::vector<Complex> mu;
  AdditiveCocycle h;

  static Unit canonical(const GridRep& rep) { return {std::vector<Complex>(rep.d(), 0.0), AdditiveCocycle(rep)}; }
};

namespace detail {

inline Complex unit_scalar(const Unit& u, const Cell& x) {
  const RealPoint xr = u.h.rep().cone().embed(x);
  Complex s{};
  for (std::size_t i = 0; i < xr.size(); ++i) s += xr[i] * u.mu.at(i);
  return guarded_exp(s);
}

inline GridFockVector unit_apply_unchecked(const Unit& u, const Cell& x, const SparseState& hx, const GridFockVector& psi) {
  const GridRep& rep = u.h.rep();
  const Complex scalar = unit_scalar(u, x);
  GridFockVector out(rep.space());
  for (const auto& t : psi.terms()) out.add_term(scalar * t.coef, hx + shift_apply(rep, x, t.arg));
  out.normalize();
  return out;
}

inline GridFockVector unit_apply_unchecked(const Unit& u, const Cell& x, const GridFockVector& psi) {
  std::vector<int> order(u.h.rep().d());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  return unit_apply_unchecked(u, x, cocycle_value_along(u.h, x, order), psi);
}

}  // namespace detail

inline GridFockVector unit_apply(const Unit& u, const Cell& x, const GridFockVector& psi) {
  if (static_cast<int>(u.mu.size()) != u.h.rep().d()) throw Error(ErrorKind::DimensionMismatch, "mu has wrong length");
  if (!psi.is_zero()) require_same_space(u.h.rep().space(), psi.space());
  const SparseState hx = cocycle_value(u.h, x);
  const double leak = detail::max_abs(shift_adjoint_apply(u.h.rep(), x, hx));
  if (leak > kCocycleTolerance) throw Error(ErrorKind::NotACocycle, "h_x not in ker V_x^*: " + std::to_string(leak));
  return detail::unit_apply_unchecked(u, x, hx, psi);
}

struct UnitResiduals {
  double semigroup = 0.0;
  double intertwine = 0.0;
};

struct UnitTestVector {
  SparseState w;
  GridFockVector psi;
};

/// Semigroup law T_{x+y} = T_x T_y and intertwining W(V_x w) T_x = T_x W(w).
/// Evaluated without the kernel guard so that broken cocycles show up as residuals.
inline UnitResiduals unit_residuals(const Unit& u, const Cell& x, const Cell& y, const std::vector<UnitTestVector>& tests) {
  const GridRep& rep = u.h.rep();
  UnitResiduals r;
  for (const auto& tv : tests) {
    const GridFockVector lhs = detail::unit_apply_unchecked(u, add(x, y), tv.psi);
    const GridFockVector rhs = detail::unit_apply_unchecked(u, x, detail::unit_apply_unchecked(u, y, tv.psi));
    r.semigroup = std::max(r.semigroup, fock_distance(lhs, rhs));
    const GridFockVector a = weyl_apply(shift_apply(rep, x, tv.w), detail::unit_apply_unchecked(u, x, tv.psi));
    const GridFockVector b = detail::unit_apply_unchecked(u, x, weyl_apply(tv.w, tv.psi));
    r.intertwine = std::max(r.intertwine, fock_distance(a, b));
  }
  return r;
}

namespace detail {

/// ||a (x) b - a' (x) b'|| from the differences, avoiding cancellation in the Gram sum.
template <class KeyA, class KeyB>
double simple_tensor_distance(const FockVector<KeyA>& a, const OneParticleVector<KeyB>& b, const FockVector<KeyA>& a2,
                              const OneParticleVector<KeyB>& b2) {
  const FockVector<KeyA> da = (a - a2).merged_close();
  const OneParticleVector<KeyB> db = b - b2;
  const double da2 = std::max(0.0, fock_inner(da, da).real());
  const double na2 = std::max(0.0, fock_inner(a2, a2).real());
  const double cross = 2.0 * (fock_inner(da, a2) * inner(b, db)).real();
  return std::sqrt(std::max(0.0, da2 * norm_sq(b) + na2 * norm_sq(db) + cross));
}

}  // namespace detail

struct OmegaUnitTestVector {
  GridFockVector psi;
  LatticeState f;
};

/// u_x = Gamma(V_x) (x) U^M_x on simple tensors; returns
/// max ||u_x u_y (psi (x) f) - omega_M(x delta, y delta) u_{x+y} (psi (x) f)||.
/// With include_phase = false the multiplier is dropped (negative control).
inline double omega_unit_residual(const GridRep& rep, const RealMatrix& m, const Cell& x, const Cell& y,
                                  const std::vector<OmegaUnitTestVector>& tests, bool include_phase = true) {
  const ConeSpec& cone = rep.cone();
  const Complex phase = include_phase ? omega_eval(m, cone.embed(x), cone.embed(y)) : Complex(1.0);
  double worst = 0.0;
  for (const auto& tv : tests) {
    const GridFockVector a = gamma_shift(rep, x, gamma_shift(rep, y, tv.psi));
    const LatticeState b = phase_translate_apply(cone, m, x, phase_translate_apply(cone, m, y, tv.f));
    const GridFockVector a2 = gamma_shift(rep, add(x, y), tv.psi);
    const LatticeState b2 = phase * phase_translate_apply(cone, m, add(x, y), tv.f);
    worst = std::max(worst, detail::simple_tensor_distance(a, b, a2, b2));
  }
  return worst;
}

/// A Weyl word W(w_1) ... W(w_m); the empty word is the identity.
using WeylWord = std::vector<SparseState>;

inline GridFockVector weyl_word_apply(const WeylWord& word, GridFockVector psi) {
  for (auto it = word.rbegin(); it != word.rend(); ++it) psi = weyl_apply(*it, psi);
  return psi;
}

/// alpha_x(W(w_1) ... W(w_m)) = W(V_x w_1) ... W(V_x w_m).
inline WeylWord flow_word(const GridRep& rep, const Cell& x, const WeylWord& word) {
  WeylWord out;
  out.reserve(word.size());
  for (const auto& w : word) out.push_back(shift_apply(rep, x, w));
  return out;
}

/// max over words and xs of |<e(0), alpha_x(X) e(0)> - <e(0), X e(0)>|.
inline double invariant_state_residual(const GridRep& rep, const std::vector<WeylWord>& words, const std::vector<Cell>& xs) {
  const GridFockVector vac = GridFockVector::vacuum(rep.space());
  double worst = 0.0;
  for (const auto& word : words) {
    const Complex base = fock_inner(vac, weyl_word_apply(word, vac));
    for (const auto& x : xs) {
      const Complex moved = fock_inner(vac, weyl_word_apply(flow_word(rep, x, word), vac));
      worst = std::max(worst, std::abs(moved - base));
    }
  }
  return worst;
}

}  // namespace coneflow

#endif  // CONEFLOW_COCYCLE_HPP
