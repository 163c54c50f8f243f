#ifndef CONEFLOW_CONE_HPP
#define CONEFLOW_CONE_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "coneflow/error.hpp"

namespace coneflow {

/// Integer lattice point; x = delta * n when embedded in the cone.
using Cell = std::vector<int>;
using RealPoint = std::vector<double>;

/// The orthant R_+^d discretized with lattice spacing delta.
struct ConeSpec {
  int d = 1;
  double delta = 1.0;

  ConeSpec() = default;
  ConeSpec(int dim, double spacing) : d(dim), delta(spacing) {
    if (dim < 1) throw Error(ErrorKind::InvalidArgument, "cone dimension must be >= 1");
    if (!(spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "lattice spacing must be > 0");
  }

  /// Measure weight of a single lattice cell.
  double cell_weight() const { return std::pow(delta, d); }

  RealPoint embed(const Cell& n) const {
    RealPoint x(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) x[i] = delta * n[i];
    return x;
  }

  bool operator==(const ConeSpec&) const = default;
};

inline void require_dim(const ConeSpec& spec, const Cell& x) {
  if (static_cast<int>(x.size()) != spec.d)
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(spec.d) +
                                                  " coordinates, got " + std::to_string(x.size()));
}

inline Cell unit_step(int d, int i) {
  Cell e(d, 0);
  e[i] = 1;
  return e;
}

inline Cell zero_cell(int d) { return Cell(d, 0); }

inline Cell add(const Cell& a, const Cell& b) {
  Cell r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

inline Cell sub(const Cell& a, const Cell& b) {
  Cell r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

inline Cell scale(int n, const Cell& a) {
  Cell r(a);
  for (int& v : r) v *= n;
  return r;
}

/// x <= y in the cone order: y - x has nonnegative coordinates.
inline bool leq(const ConeSpec& spec, const Cell& x, const Cell& y) {
  require_dim(spec, x);
  require_dim(spec, y);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (y[i] < x[i]) return false;
  return true;
}

inline bool in_interior(const ConeSpec& spec, const Cell& x) {
  require_dim(spec, x);
  for (int v : x)
    if (v <= 0) return false;
  return true;
}

inline bool in_cone(const ConeSpec& spec, const Cell& x) {
  require_dim(spec, x);
  for (int v : x)
    if (v < 0) return false;
  return true;
}

/// Least n >= 1 with n*a - x strictly positive in every coordinate.
inline int archimedean_n(const ConeSpec& spec, const Cell& a, const Cell& x) {
  require_dim(spec, x);
  if (!in_interior(spec, a)) throw Error(ErrorKind::NotInterior, "archimedean_n needs an interior point");
  int n = 1;
  for (std::size_t i = 0; i < a.size(); ++i) {
    // n * a_i > x_i  <=>  n > x_i / a_i
    int need = x[i] >= 0 ? x[i] / a[i] + 1 : 1;
    if (need > n) n = need;
  }
  return n;
}

inline std::string to_string(const Cell& c) {
  std::string s = "(";
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(c[i]);
  }
  return s + ")";
}

}  // namespace coneflow

#endif  // CONEFLOW_CONE_HPP
