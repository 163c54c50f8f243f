#ifndef CONEFLOW_ISOREP_HPP
#define CONEFLOW_ISOREP_HPP

// Shift representations of the orthant on P-modules A (sets of lattice cells with
// A + P contained in A), acting on finitely supported vector-valued functions.
//
//   (V_x f)(y)  = f(y - x)  if y - x in A, else 0
//   (V_x* f)(y) = f(y + x)  for y in A
//
// All actions are exact: cells move, values do not change.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstdio>
#include <complex>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "coneflow/cone.hpp"
#include "coneflow/error.hpp"
#include "coneflow/fock.hpp"

namespace coneflow {

class ModuleDescriptor;

enum class Axis { Full, Half };

struct OrthantModule {
  int d = 1;
};
struct AxisProductModule {
  std::vector<Axis> axes;
};
/// [a, inf) x [b, inf)  disjoint-union  [0, inf) x [0, b), with a < 0 < b.
struct StaircaseModule {
  int a = -1;
  int b = 1;
};
/// [1, inf) x [a, 0)  union  [0, inf) x [0, inf), with a < 0.
struct SectionModule {
  int a = -1;
};
struct TranslateModule {
  std::shared_ptr<const ModuleDescriptor> inner;
  Cell shift;
};

class ModuleDescriptor {
 public:
  using Variant = std::variant<OrthantModule, AxisProductModule, StaircaseModule, SectionModule, TranslateModule>;

  ModuleDescriptor() : v_(OrthantModule{1}) {}

  static ModuleDescriptor orthant(int d) {
    if (d < 1) throw Error(ErrorKind::InvalidArgument, "orthant dimension must be >= 1");
    return ModuleDescriptor(OrthantModule{d});
  }
  static ModuleDescriptor axis_product(std::vector<Axis> axes) {
    if (axes.empty() || std::none_of(axes.begin(), axes.end(), [](Axis a) { return a == Axis::Half; }))
      throw Error(ErrorKind::InvalidArgument, "axis product needs at least one half-line factor");
    return ModuleDescriptor(AxisProductModule{std::move(axes)});
  }
  static ModuleDescriptor staircase(int a, int b) {
    if (a >= 0 || b <= 0) throw Error(ErrorKind::InvalidArgument, "staircase needs a < 0 < b");
    return ModuleDescriptor(StaircaseModule{a, b});
  }
  static ModuleDescriptor section(int a) {
    if (a >= 0) throw Error(ErrorKind::InvalidArgument, "section module needs a < 0");
    return ModuleDescriptor(SectionModule{a});
  }
  static ModuleDescriptor translate(const ModuleDescriptor& inner, Cell shift) {
    if (static_cast<int>(shift.size()) != inner.dim())
      throw Error(ErrorKind::DimensionMismatch, "translation vector has wrong dimension");
    return ModuleDescriptor(TranslateModule{std::make_shared<const ModuleDescriptor>(inner), std::move(shift)});
  }

  const Variant& variant() const { return v_; }

  int dim() const {
    return std::visit(
        [](const auto& m) -> int {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, OrthantModule>) return m.d;
          else if constexpr (std::is_same_v<T, AxisProductModule>) return static_cast<int>(m.axes.size());
          else if constexpr (std::is_same_v<T, TranslateModule>) return m.inner->dim();
          else return 2;
        },
        v_);
  }

  bool contains(const Cell& c) const {
    if (static_cast<int>(c.size()) != dim())
      throw Error(ErrorKind::DimensionMismatch, "cell " + to_string(c) + " vs module dimension " + std::to_string(dim()));
    return contains_unchecked(c);
  }

  /// Lower corner of the natural bounding region; `extent` sizes unbounded axes.
  Cell natural_origin(int extent) const {
    return std::visit(
        [extent](const auto& m) -> Cell {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, OrthantModule>) {
            return Cell(m.d, 0);
          } else if constexpr (std::is_same_v<T, AxisProductModule>) {
            Cell o(m.axes.size(), 0);
            for (std::size_t i = 0; i < m.axes.size(); ++i)
              if (m.axes[i] == Axis::Full) o[i] = -(extent / 2);
            return o;
          } else if constexpr (std::is_same_v<T, StaircaseModule>) {
            return Cell{m.a, 0};
          } else if constexpr (std::is_same_v<T, SectionModule>) {
            return Cell{0, m.a};
          } else {
            return add(m.inner->natural_origin(extent), m.shift);
          }
        },
        v_);
  }

  std::string to_text() const;

  bool operator==(const ModuleDescriptor& other) const { return to_text() == other.to_text(); }

 private:
  explicit ModuleDescriptor(Variant v) : v_(std::move(v)) {}

  bool contains_unchecked(const Cell& c) const {
    return std::visit(
        [&c](const auto& m) -> bool {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, OrthantModule>) {
            return std::all_of(c.begin(), c.end(), [](int v) { return v >= 0; });
          } else if constexpr (std::is_same_v<T, AxisProductModule>) {
            for (std::size_t i = 0; i < c.size(); ++i)
              if (m.axes[i] == Axis::Half && c[i] < 0) return false;
            return true;
          } else if constexpr (std::is_same_v<T, StaircaseModule>) {
            return (c[0] >= m.a && c[1] >= m.b) || (c[0] >= 0 && c[1] >= 0 && c[1] < m.b);
          } else if constexpr (std::is_same_v<T, SectionModule>) {
            return (c[0] >= 1 && c[1] >= m.a && c[1] < 0) || (c[0] >= 0 && c[1] >= 0);
          } else {
            return m.inner->contains_unchecked(sub(c, m.shift));
          }
        },
        v_);
  }

  Variant v_;
};

inline bool cell_in_module(const ModuleDescriptor& desc, const Cell& c) { return desc.contains(c); }

namespace detail {

inline std::string join_ints(const Cell& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(c[i]);
  }
  return s;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return parts;
}

inline int parse_int(std::string_view s, std::string_view context) {
  s = trim(s);
  if (s.empty()) throw Error(ErrorKind::ParseError, "empty integer in '" + std::string(context) + "'");
  std::size_t pos = 0;
  int value = 0;
  try {
    value = std::stoi(std::string(s), &pos);
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError, "bad integer '" + std::string(s) + "'");
  }
  if (pos != s.size()) throw Error(ErrorKind::ParseError, "bad integer '" + std::string(s) + "'");
  return value;
}

inline Cell parse_ints(std::string_view s, std::string_view context) {
  Cell out;
  for (auto part : split(s, ',')) out.push_back(parse_int(part, context));
  return out;
}

}  // namespace detail

inline std::string ModuleDescriptor::to_text() const {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OrthantModule>) {
          return "orthant:" + std::to_string(m.d);
        } else if constexpr (std::is_same_v<T, AxisProductModule>) {
          std::string s = "axis:";
          for (std::size_t i = 0; i < m.axes.size(); ++i) {
            if (i) s += ",";
            s += m.axes[i] == Axis::Half ? "+" : "-";
          }
          return s;
        } else if constexpr (std::is_same_v<T, StaircaseModule>) {
          return "staircase:" + std::to_string(m.a) + "," + std::to_string(m.b);
        } else if constexpr (std::is_same_v<T, SectionModule>) {
          return "section:" + std::to_string(m.a);
        } else {
          return "translate(" + m.inner->to_text() + ";" + detail::join_ints(m.shift) + ")";
        }
      },
      v_);
}

/// Parse the textual form: `orthant:2`, `axis:-,+` ('+' half line, '-' full line),
/// `staircase:-1,1`, `section:-1`, `translate(<module>;v1,v2)`.
inline ModuleDescriptor parse_module(std::string_view text) {
  const std::string_view s = detail::trim(text);
  if (s.starts_with("translate(")) {
    if (!s.ends_with(")")) throw Error(ErrorKind::ParseError, "unterminated translate: " + std::string(s));
    const std::string_view body = s.substr(10, s.size() - 11);
    const auto semi = body.rfind(';');
    if (semi == std::string_view::npos) throw Error(ErrorKind::ParseError, "translate needs ';': " + std::string(s));
    return ModuleDescriptor::translate(parse_module(body.substr(0, semi)), detail::parse_ints(body.substr(semi + 1), s));
  }
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) throw Error(ErrorKind::ParseError, "missing ':' in " + std::string(s));
  const std::string_view kind = s.substr(0, colon);
  const std::string_view args = s.substr(colon + 1);
  try {
    if (kind == "orthant") return ModuleDescriptor::orthant(detail::parse_int(args, s));
    if (kind == "axis") {
      std::vector<Axis> axes;
      for (auto part : detail::split(args, ',')) {
        if (part == "+" || part == "half") axes.push_back(Axis::Half);
        else if (part == "-" || part == "full") axes.push_back(Axis::Full);
        else throw Error(ErrorKind::ParseError, "bad axis token '" + std::string(part) + "'");
      }
      return ModuleDescriptor::axis_product(std::move(axes));
    }
    if (kind == "staircase") {
      const Cell ab = detail::parse_ints(args, s);
      if (ab.size() != 2) throw Error(ErrorKind::ParseError, "staircase needs two integers");
      return ModuleDescriptor::staircase(ab[0], ab[1]);
    }
    if (kind == "section") return ModuleDescriptor::section(detail::parse_int(args, s));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParseError) throw;
    throw Error(ErrorKind::ParseError, e.what());
  }
  throw Error(ErrorKind::ParseError, "unknown module kind '" + std::string(kind) + "'");
}

/// Axis-aligned box of cells, lo inclusive, hi exclusive.
struct Box {
  Cell lo;
  Cell hi;

  static Box from_extent(Cell lo, const std::vector<int>& extent) {
    Cell hi = lo;
    for (std::size_t i = 0; i < hi.size(); ++i) hi[i] += extent[i];
    return {std::move(lo), std::move(hi)};
  }

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Cell& c) const {
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c[i] < lo[i] || c[i] >= hi[i]) return false;
    return true;
  }

  Box grown(int margin) const {
    Box b = *this;
    for (int& v : b.hi) v += margin;
    return b;
  }

  /// Cells in lexicographic order.
  std::vector<Cell> cells() const {
    std::vector<Cell> out;
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (hi[i] <= lo[i]) return out;
    Cell c = lo;
    while (true) {
      out.push_back(c);
      int i = dim() - 1;
      while (i >= 0) {
        if (++c[i] < hi[i]) break;
        c[i] = lo[i];
        --i;
      }
      if (i < 0) break;
    }
    return out;
  }
};

/// The natural box of `extent` cells per axis, anchored at the module's lower corner.
inline Box default_box(const ModuleDescriptor& desc, int extent) {
  return Box::from_extent(desc.natural_origin(extent), std::vector<int>(desc.dim(), extent));
}

/// A site of the one-particle space: summand index, lattice cell, fiber index.
struct Site {
  int summand = 0;
  Cell cell;
  int fiber = 0;

  auto operator<=>(const Site&) const = default;
};

inline std::string to_string(const Site& s) {
  std::string out;
  if (s.summand != 0) out += std::to_string(s.summand) + "/";
  return out + detail::join_ints(s.cell) + "|" + std::to_string(s.fiber);
}

struct Summand {
  ModuleDescriptor module;
  int multiplicity = 1;
};

/// Shift representation on L^2(A) (x) C^k, or a finite direct sum of such.
class GridRep {
 public:
  GridRep(ConeSpec cone, ModuleDescriptor module, int multiplicity)
      : cone_(cone), summands_{Summand{std::move(module), multiplicity}} {
    validate();
  }

  GridRep(ConeSpec cone, std::vector<Summand> summands) : cone_(cone), summands_(std::move(summands)) { validate(); }

  static GridRep direct_sum(const GridRep& a, const GridRep& b) {
    if (!(a.cone_ == b.cone_)) throw Error(ErrorKind::ConeMismatch, "direct sum over different cones");
    std::vector<Summand> s = a.summands_;
    s.insert(s.end(), b.summands_.begin(), b.summands_.end());
    return GridRep(a.cone_, std::move(s));
  }

  const ConeSpec& cone() const { return cone_; }
  int d() const { return cone_.d; }
  const std::vector<Summand>& summands() const { return summands_; }
  const Summand& summand(int i) const { return summands_.at(i); }
  const SpacePtr& space() const { return space_; }
  const std::string& label() const { return space_->label; }

  /// Common multiplicity of all summands, or nullopt when they differ.
  std::optional<int> uniform_multiplicity() const {
    const int k = summands_.front().multiplicity;
    for (const auto& s : summands_)
      if (s.multiplicity != k) return std::nullopt;
    return k;
  }

  bool contains_cell(int summand, const Cell& c) const { return summands_.at(summand).module.contains(c); }

  bool contains(const Site& s) const {
    if (s.summand < 0 || s.summand >= static_cast<int>(summands_.size())) return false;
    const Summand& sm = summands_[s.summand];
    return s.fiber >= 0 && s.fiber < sm.multiplicity && sm.module.contains(s.cell);
  }

 private:
  void validate() {
    if (summands_.empty()) throw Error(ErrorKind::InvalidArgument, "representation needs a summand");
    std::string label;
    for (std::size_t i = 0; i < summands_.size(); ++i) {
      const auto& s = summands_[i];
      if (s.module.dim() != cone_.d)
        throw Error(ErrorKind::DimensionMismatch, "module " + s.module.to_text() + " vs cone dimension " +
                                                      std::to_string(cone_.d));
      if (s.multiplicity < 1) throw Error(ErrorKind::InvalidArgument, "multiplicity must be >= 1");
      if (i) label += " (+) ";
      label += s.module.to_text() + "^" + std::to_string(s.multiplicity);
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, " @delta=%.17g", cone_.delta);
    space_ = make_space(label + buf, cone_.cell_weight());
  }

  ConeSpec cone_;
  std::vector<Summand> summands_;
  SpacePtr space_;
};

using SparseState = OneParticleVector<Site>;
using GridFockVector = FockVector<Site>;

/// Unit-mass state at a site; throws unless the site belongs to the representation.
inline SparseState basis_state(const GridRep& rep, const Site& site, Complex value = 1.0) {
  if (!rep.contains(site)) throw Error(ErrorKind::InvalidArgument, "site " + to_string(site) + " not in " + rep.label());
  return SparseState::delta(rep.space(), site, value);
}

inline SparseState basis_state(const GridRep& rep, const Cell& cell, int fiber = 0) {
  return basis_state(rep, Site{0, cell, fiber});
}

namespace detail {

inline void require_lattice_step(const GridRep& rep, const Cell& x) {
  require_dim(rep.cone(), x);
  if (!in_cone(rep.cone(), x)) throw Error(ErrorKind::InvalidArgument, "shift " + to_string(x) + " not in the cone");
}

inline void require_attached(const GridRep& rep, const SparseState& f) {
  if (!f.is_zero() || f.space()) require_same_space(rep.space(), f.space());
}

}  // namespace detail

/// V_x f.
inline SparseState shift_apply(const GridRep& rep, const Cell& x, const SparseState& f) {
  detail::require_lattice_step(rep, x);
  detail::require_attached(rep, f);
  SparseState out(rep.space());
  for (const auto& [site, value] : f.entries()) out.set(Site{site.summand, add(site.cell, x), site.fiber}, value);
  return out;
}

/// V_x^* f.
inline SparseState shift_adjoint_apply(const GridRep& rep, const Cell& x, const SparseState& f) {
  detail::require_lattice_step(rep, x);
  detail::require_attached(rep, f);
  SparseState out(rep.space());
  for (const auto& [site, value] : f.entries()) {
    Cell y = sub(site.cell, x);
    if (rep.contains_cell(site.summand, y)) out.set(Site{site.summand, std::move(y), site.fiber}, value);
  }
  return out;
}

/// True if the site lies in ker V_x^* = range of E_x = 1 - V_x V_x^*.
inline bool in_kernel_of_adjoint(const GridRep& rep, const Cell& x, const Site& site) {
  return !rep.contains_cell(site.summand, sub(site.cell, x));
}

/// E_x f: the component of f orthogonal to the range of V_x.
inline SparseState kernel_projection(const GridRep& rep, const Cell& x, const SparseState& f) {
  SparseState out(rep.space());
  for (const auto& [site, value] : f.entries())
    if (in_kernel_of_adjoint(rep, x, site)) out.set(site, value);
  return out;
}

/// ||(V_t^* V_s - V_s V_t^*) f||.
inline double commutation_defect(const GridRep& rep, const Cell& s, const Cell& t, const SparseState& f) {
  if (rep.d() != 2) throw Error(ErrorKind::DimensionMismatch, "commutation defect is defined for d = 2");
  const SparseState lhs = shift_adjoint_apply(rep, t, shift_apply(rep, s, f));
  const SparseState rhs = shift_apply(rep, s, shift_adjoint_apply(rep, t, f));
  return norm(lhs - rhs);
}

struct DefectWitness {
  Cell s;
  Cell t;
  Site site;
  double defect = 0.0;
};

/// Exhaustive search over unit-mass states in the window (module cells inside `window`,
/// every summand, fiber 0) and steps s = (m,0), t = (0,n) with 1 <= m, n <= max_step.
/// max_step defaults to the largest window extent.
inline std::optional<DefectWitness> defect_witness_search(const GridRep& rep, const Box& window, int max_step = 0) {
  if (rep.d() != 2) throw Error(ErrorKind::DimensionMismatch, "defect search is defined for d = 2");
  if (max_step <= 0) max_step = std::max(window.hi[0] - window.lo[0], window.hi[1] - window.lo[1]);
  const auto cells = window.cells();
  for (int sm = 0; sm < static_cast<int>(rep.summands().size()); ++sm) {
    for (const Cell& c : cells) {
      if (!rep.contains_cell(sm, c)) continue;
      const Site site{sm, c, 0};
      const SparseState f = basis_state(rep, site);
      for (int m = 1; m <= max_step; ++m) {
        for (int n = 1; n <= max_step; ++n) {
          const Cell s{m, 0};
          const Cell t{0, n};
          const double defect = commutation_defect(rep, s, t, f);
          if (defect > 1e-9) return DefectWitness{s, t, site, defect};
        }
      }
    }
  }
  return std::nullopt;
}

/// Least t in [1, tmax] with V_{t a}^* f = 0, or nullopt if none.
inline std::optional<int> purity_t0(const GridRep& rep, const SparseState& f, const Cell& a, int tmax) {
  if (!in_interior(rep.cone(), a)) throw Error(ErrorKind::NotInterior, "purity direction must be interior");
  if (f.is_zero()) throw Error(ErrorKind::ZeroState, "purity_t0 needs a nonzero state");
  for (int t = 1; t <= tmax; ++t)
    if (shift_adjoint_apply(rep, scale(t, a), f).is_zero()) return t;
  return std::nullopt;
}

}  // namespace coneflow

#endif  // CONEFLOW_ISOREP_HPP
