#ifndef CONEFLOW_INTERTWINER_HPP
#define CONEFLOW_INTERTWINER_HPP

// Finite compressions of shift representations and their intertwiner spaces
//   L(V2, V1) = { T : V1_i T = T V2_i,  V1_i^* T = T V2_i^*,  i = 1..d }.
//
// The stacked system in vec(T) is presolved: one-term rows pin an entry to zero
// and two-term rows of the form a t_p - a t_q merge entries (union-find). Any
// remaining rows are solved by SVD on the merged variables. For compressed shifts
// every row is of the first two kinds, so the SVD stage is usually empty.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "coneflow/cocycle.hpp"
#include "coneflow/cone.hpp"
#include "coneflow/error.hpp"
#include "coneflow/isorep.hpp"

namespace coneflow {

using ComplexMatrix = Eigen::MatrixXcd;

struct CompressedRep {
  int d = 0;
  std::vector<Site> sites;                 // row/column labels
  std::vector<ComplexMatrix> step_matrices;  // V_1 .. V_d
  std::vector<Box> boxes;                  // per summand
  std::string label;

  int size() const { return static_cast<int>(sites.size()); }
};

/// Window = module cells inside boxes[s] for each summand s, all fibers.
/// Step matrices drop targets outside the window.
inline CompressedRep compress(const GridRep& rep, const std::vector<Box>& boxes) {
  if (boxes.size() != rep.summands().size()) throw Error(ErrorKind::InvalidArgument, "need one box per summand");
  CompressedRep c;
  c.d = rep.d();
  c.boxes = boxes;
  c.label = rep.label();
  for (int s = 0; s < static_cast<int>(boxes.size()); ++s) {
    if (boxes[s].dim() != rep.d()) throw Error(ErrorKind::DimensionMismatch, "box dimension mismatch");
    for (const Cell& cell : boxes[s].cells())
      if (rep.contains_cell(s, cell))
        for (int f = 0; f < rep.summand(s).multiplicity; ++f) c.sites.push_back(Site{s, cell, f});
  }
  if (c.sites.empty()) throw Error(ErrorKind::EmptyWindow, "no module cells inside the box");
  std::map<Site, int> index;
  for (int i = 0; i < c.size(); ++i) index.emplace(c.sites[i], i);
  for (int axis = 0; axis < rep.d(); ++axis) {
    ComplexMatrix v = ComplexMatrix::Zero(c.size(), c.size());
    for (int src = 0; src < c.size(); ++src) {
      const Site& s = c.sites[src];
      auto it = index.find(Site{s.summand, add(s.cell, unit_step(rep.d(), axis)), s.fiber});
      if (it != index.end()) v(it->second, src) = 1.0;
    }
    c.step_matrices.push_back(std::move(v));
  }
  return c;
}

inline CompressedRep compress(const GridRep& rep, const Box& box) {
  return compress(rep, std::vector<Box>(rep.summands().size(), box));
}

/// Each summand compressed to its default box of the given extent.
inline CompressedRep compress_natural(const GridRep& rep, int extent) {
  std::vector<Box> boxes;
  for (const auto& s : rep.summands()) boxes.push_back(default_box(s.module, extent));
  return compress(rep, boxes);
}

struct IntertwinerSpace {
  std::vector<ComplexMatrix> basis;  // Frobenius-orthonormal
  int dimension = 0;
  double residual = 0.0;
  int rows = 0;  // size of target window
  int cols = 0;  // size of source window
  bool identity_in_span = false;
  double identity_residual = 0.0;
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), zero_(n, false) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    zero_[a] = zero_[a] || zero_[b];
  }

  void pin_zero(std::size_t a) { zero_[find(a)] = true; }
  bool pinned(std::size_t a) { return zero_[find(a)]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<bool> zero_;
};

using SparseColumn = std::vector<std::pair<int, Complex>>;

/// Nonzeros of each row of a (rows x rows) matrix.
inline std::vector<SparseColumn> row_nonzeros(const ComplexMatrix& a) {
  std::vector<SparseColumn> out(a.rows());
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      if (a(r, c) != Complex{}) out[r].emplace_back(static_cast<int>(c), a(r, c));
  return out;
}

/// Nonzeros of each column.
inline std::vector<SparseColumn> col_nonzeros(const ComplexMatrix& a) {
  std::vector<SparseColumn> out(a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      if (a(r, c) != Complex{}) out[c].emplace_back(static_cast<int>(r), a(r, c));
  return out;
}

inline double max_abs(const ComplexMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace detail

/// max_i max(|V1_i T - T V2_i|, |V1_i^* T - T V2_i^*|) entrywise.
inline double intertwining_residual(const CompressedRep& target, const CompressedRep& source, const ComplexMatrix& t) {
  double r = 0.0;
  for (int i = 0; i < target.d; ++i) {
    const ComplexMatrix& a = target.step_matrices[i];
    const ComplexMatrix& b = source.step_matrices[i];
    r = std::max(r, detail::max_abs(a * t - t * b));
    r = std::max(r, detail::max_abs(a.adjoint() * t - t * b.adjoint()));
  }
  return r;
}

/// L(source, target): all T with target_i T = T source_i and target_i^* T = T source_i^*.
inline IntertwinerSpace solve_intertwiners(const CompressedRep& target, const CompressedRep& source) {
  if (target.d != source.d) throw Error(ErrorKind::ConeMismatch, "representations of different cones");
  const int n1 = target.size();
  const int n2 = source.size();
  const std::size_t nvar = static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2);
  auto var = [n1](int p, int q) { return static_cast<std::size_t>(p) + static_cast<std::size_t>(n1) * q; };

  detail::UnionFind uf(nvar);
  std::vector<std::vector<std::pair<std::size_t, Complex>>> general;

  auto consume = [&](std::vector<std::pair<std::size_t, Complex>>& row) {
    std::sort(row.begin(), row.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<std::pair<std::size_t, Complex>> merged;
    for (const auto& e : row) {
      if (!merged.empty() && merged.back().first == e.first)
        merged.back().second += e.second;
      else
        merged.push_back(e);
    }
    std::erase_if(merged, [](const auto& e) { return e.second == Complex{}; });
    if (merged.empty()) return;
    if (merged.size() == 1) {
      uf.pin_zero(merged[0].first);
    } else if (merged.size() == 2 && merged[0].second == -merged[1].second) {
      uf.unite(merged[0].first, merged[1].first);
    } else {
      general.push_back(std::move(merged));
    }
  };

  std::vector<std::pair<std::size_t, Complex>> row;
  for (int i = 0; i < target.d; ++i) {
    for (int adj = 0; adj < 2; ++adj) {
      const ComplexMatrix a = adj ? ComplexMatrix(target.step_matrices[i].adjoint()) : target.step_matrices[i];
      const ComplexMatrix b = adj ? ComplexMatrix(source.step_matrices[i].adjoint()) : source.step_matrices[i];
      const auto a_rows = detail::row_nonzeros(a);
      const auto b_cols = detail::col_nonzeros(b);
      // (A T - T B)[p, q] = sum_r A[p,r] T[r,q] - sum_r T[p,r] B[r,q]
      for (int q = 0; q < n2; ++q)
        for (int p = 0; p < n1; ++p) {
          row.clear();
          for (const auto& [r, v] : a_rows[p]) row.emplace_back(var(r, q), v);
          for (const auto& [r, v] : b_cols[q]) row.emplace_back(var(p, r), -v);
          consume(row);
        }
    }
  }

  // Surviving merged variables, each an orthonormal indicator of its class.
  std::map<std::size_t, int> comp_index;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t v = 0; v < nvar; ++v) {
    if (uf.pinned(v)) continue;
    const std::size_t root = uf.find(v);
    auto [it, inserted] = comp_index.try_emplace(root, static_cast<int>(members.size()));
    if (inserted) members.emplace_back();
    members[it->second].push_back(v);
  }
  const int ncomp = static_cast<int>(members.size());

  std::vector<std::map<int, Complex>> reduced;
  for (const auto& g : general) {
    std::map<int, Complex> r;
    for (const auto& [v, coef] : g) {
      if (uf.pinned(v)) continue;
      const int c = comp_index.at(uf.find(v));
      r[c] += coef / std::sqrt(static_cast<double>(members[c].size()));
    }
    std::erase_if(r, [](const auto& kv) { return std::abs(kv.second) == 0.0; });
    if (!r.empty()) reduced.push_back(std::move(r));
  }

  ComplexMatrix null_basis;
  if (reduced.empty()) {
    null_basis = ComplexMatrix::Identity(ncomp, ncomp);
  } else {
    ComplexMatrix g = ComplexMatrix::Zero(static_cast<Eigen::Index>(reduced.size()), ncomp);
    for (std::size_t r = 0; r < reduced.size(); ++r)
      for (const auto& [c, v] : reduced[r]) g(static_cast<Eigen::Index>(r), c) = v;
    Eigen::BDCSVD<ComplexMatrix> svd(g, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cutoff = kRankTolerance * std::max(sv.size() ? sv(0) : 0.0, 1.0);
    int rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
      if (sv(k) > cutoff) ++rank;
    null_basis = svd.matrixV().rightCols(ncomp - rank);
  }

  IntertwinerSpace out;
  out.rows = n1;
  out.cols = n2;
  out.dimension = static_cast<int>(null_basis.cols());
  for (Eigen::Index b = 0; b < null_basis.cols(); ++b) {
    ComplexMatrix t = ComplexMatrix::Zero(n1, n2);
    for (int c = 0; c < ncomp; ++c) {
      const Complex z = null_basis(c, b);
      if (z == Complex{}) continue;
      const Complex value = z / std::sqrt(static_cast<double>(members[c].size()));
      for (std::size_t v : members[c]) t(static_cast<Eigen::Index>(v % n1), static_cast<Eigen::Index>(v / n1)) = value;
    }
    out.residual = std::max(out.residual, intertwining_residual(target, source, t));
    out.basis.push_back(std::move(t));
  }
  return out;
}

/// Frobenius distance from m to the span of the (orthonormal) basis, relative to |m|_F.
inline double span_projection_error(const IntertwinerSpace& space, const ComplexMatrix& m) {
  ComplexMatrix rest = m;
  for (const auto& b : space.basis) {
    const Complex coef = (b.adjoint() * m).trace();
    rest -= coef * b;
  }
  const double scale = std::max(m.norm(), 1e-300);
  return rest.norm() / scale;
}

/// Self-intertwiners, plus a check that the identity lies in the computed span.
inline IntertwinerSpace commutant_dim(const CompressedRep& c) {
  IntertwinerSpace space = solve_intertwiners(c, c);
  space.identity_residual = span_projection_error(space, ComplexMatrix::Identity(c.size(), c.size()));
  space.identity_in_span = space.identity_residual <= 1e-8;
  return space;
}

/// Computable fingerprint of the gauge group: (cone dimension, dim of additive cocycles,
/// dim of the commutant).
struct GaugeProfile {
  int d = 0;
  int cocycle_dim = 0;
  int commutant_dim = 0;

  bool operator==(const GaugeProfile&) const = default;
};

inline GaugeProfile gauge_profile(const GridRep& rep, const std::vector<Box>& boxes, const SolveRegion& region) {
  GaugeProfile p;
  p.d = rep.d();
  p.cocycle_dim = solve_cocycles(rep, region).dimension;
  p.commutant_dim = commutant_dim(compress(rep, boxes)).dimension;
  return p;
}

inline GaugeProfile gauge_profile(const GridRep& rep, int box_extent, int core_extent) {
  std::vector<Box> boxes;
  for (const auto& s : rep.summands()) boxes.push_back(default_box(s.module, box_extent));
  return gauge_profile(rep, boxes, SolveRegion::natural(rep, core_extent));
}

}  // namespace coneflow

#endif  // CONEFLOW_INTERTWINER_HPP
