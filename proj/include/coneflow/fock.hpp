#ifndef CONEFLOW_FOCK_HPP
#define CONEFLOW_FOCK_HPP

// Exact calculus on the symmetric Fock space over a finitely supported
// one-particle space. Vectors are finite combinations of exponential vectors
// e(u), on which Weyl operators and second quantizations act in closed form.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coneflow/error.hpp"

namespace coneflow {

using Complex = std::complex<double>;

/// Entries below this modulus are dropped when a one-particle vector is canonicalized.
inline constexpr double kEntryDropThreshold = 1e-14;
/// Guard on |exponent| for e^{<u|v>} and the Weyl prefactor.
inline constexpr double kExponentGuard = 300.0;
/// Arguments closer than this (sup norm, relative to max(1, |entry|)) are identified
/// when the norm of a difference is evaluated.
inline constexpr double kArgumentMergeTolerance = 1e-12;

/// Identity of a one-particle space: a label plus the measure weight of a single site.
struct OneParticleSpace {
  std::string label;
  double weight = 1.0;
};

using SpacePtr = std::shared_ptr<const OneParticleSpace>;

inline SpacePtr make_space(std::string label, double weight = 1.0) {
  return std::make_shared<const OneParticleSpace>(OneParticleSpace{std::move(label), weight});
}

inline bool same_space(const SpacePtr& a, const SpacePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return a->label == b->label && a->weight == b->weight;
}

inline void require_same_space(const SpacePtr& a, const SpacePtr& b) {
  if (!same_space(a, b))
    throw Error(ErrorKind::SpaceMismatch, (a ? a->label : std::string("<none>")) + " vs " +
                                              (b ? b->label : std::string("<none>")));
}

/// Finitely supported vector of a one-particle space. Entries are kept sorted by key.
template <class Key>
class OneParticleVector {
 public:
  using Entries = std::map<Key, Complex>;

  OneParticleVector() = default;
  explicit OneParticleVector(SpacePtr space) : space_(std::move(space)) {}
  OneParticleVector(SpacePtr space, Entries entries) : space_(std::move(space)), entries_(std::move(entries)) {
    canonicalize();
  }

  static OneParticleVector delta(SpacePtr space, const Key& key, Complex value = 1.0) {
    OneParticleVector v(std::move(space));
    v.add(key, value);
    return v;
  }

  const SpacePtr& space() const { return space_; }
  const Entries& entries() const { return entries_; }
  double weight() const { return space_ ? space_->weight : 1.0; }
  bool is_zero() const { return entries_.empty(); }
  std::size_t support_size() const { return entries_.size(); }

  Complex at(const Key& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? Complex{} : it->second;
  }

  void add(const Key& key, Complex value) {
    auto [it, inserted] = entries_.try_emplace(key, value);
    if (!inserted) it->second += value;
    if (std::abs(it->second) < kEntryDropThreshold) entries_.erase(it);
  }

  void set(const Key& key, Complex value) {
    if (std::abs(value) < kEntryDropThreshold)
      entries_.erase(key);
    else
      entries_[key] = value;
  }

  void canonicalize() {
    std::erase_if(entries_, [](const auto& kv) { return std::abs(kv.second) < kEntryDropThreshold; });
  }

  OneParticleVector& operator+=(const OneParticleVector& other) {
    require_same_space(space_, other.space_);
    for (const auto& [k, v] : other.entries_) add(k, v);
    return *this;
  }

  OneParticleVector& operator-=(const OneParticleVector& other) {
    require_same_space(space_, other.space_);
    for (const auto& [k, v] : other.entries_) add(k, -v);
    return *this;
  }

  OneParticleVector& operator*=(Complex z) {
    for (auto& kv : entries_) kv.second *= z;
    canonicalize();
    return *this;
  }

  friend OneParticleVector operator+(OneParticleVector a, const OneParticleVector& b) { return a += b; }
  friend OneParticleVector operator-(OneParticleVector a, const OneParticleVector& b) { return a -= b; }
  friend OneParticleVector operator*(Complex z, OneParticleVector a) { return a *= z; }
  OneParticleVector operator-() const { return Complex(-1.0) * *this; }

  /// Exact equality of the stored (canonical) entries.
  friend bool operator==(const OneParticleVector& a, const OneParticleVector& b) {
    return same_space(a.space_, b.space_) && a.entries_ == b.entries_;
  }

 private:
  SpacePtr space_;
  Entries entries_;
};

/// <u|v>, antilinear in the first argument, with the site measure weight.
template <class Key>
Complex inner(const OneParticleVector<Key>& u, const OneParticleVector<Key>& v) {
  require_same_space(u.space(), v.space());
  Complex s{};
  const auto& a = u.entries();
  const auto& b = v.entries();
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      s += std::conj(i->second) * j->second;
      ++i;
      ++j;
    }
  }
  return u.weight() * s;
}

template <class Key>
double norm_sq(const OneParticleVector<Key>& u) {
  double s = 0.0;
  for (const auto& kv : u.entries()) s += std::norm(kv.second);
  return u.weight() * s;
}

template <class Key>
double norm(const OneParticleVector<Key>& u) {
  return std::sqrt(norm_sq(u));
}

namespace detail {

template <class Key>
bool entries_less(const typename OneParticleVector<Key>::Entries& a,
                  const typename OneParticleVector<Key>::Entries& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](const auto& x, const auto& y) {
    if (x.first < y.first) return true;
    if (y.first < x.first) return false;
    if (x.second.real() != y.second.real()) return x.second.real() < y.second.real();
    return x.second.imag() < y.second.imag();
  });
}

template <class Key>
bool entries_close(const typename OneParticleVector<Key>::Entries& a,
                   const typename OneParticleVector<Key>::Entries& b, double tol) {
  auto i = a.begin();
  auto j = b.begin();
  auto ok = [tol](Complex x, Complex y) {
    const double scale = std::max({1.0, std::abs(x), std::abs(y)});
    return std::abs(x - y) <= tol * scale;
  };
  while (i != a.end() || j != b.end()) {
    if (j == b.end() || (i != a.end() && i->first < j->first)) {
      if (!ok(i->second, Complex{})) return false;
      ++i;
    } else if (i == a.end() || j->first < i->first) {
      if (!ok(Complex{}, j->second)) return false;
      ++j;
    } else {
      if (!ok(i->second, j->second)) return false;
      ++i;
      ++j;
    }
  }
  return true;
}

inline Complex guarded_exp(Complex z) {
  if (std::abs(z) > kExponentGuard)
    throw Error(ErrorKind::ExponentOverflow, "exponent magnitude " + std::to_string(std::abs(z)));
  return std::exp(z);
}

}  // namespace detail

/// <e(u), e(v)> = exp(<u|v>).
template <class Key>
Complex exp_inner(const OneParticleVector<Key>& u, const OneParticleVector<Key>& v) {
  return detail::guarded_exp(inner(u, v));
}

/// Finite linear combination sum_i c_i e(u_i) with pairwise distinct arguments.
template <class Key>
class FockVector {
 public:
  using Argument = OneParticleVector<Key>;

  struct Term {
    Complex coef;
    Argument arg;
  };

  FockVector() = default;
  explicit FockVector(SpacePtr space) : space_(std::move(space)) {}

  /// c * e(u)
  static FockVector exponential(const Argument& u, Complex coef = 1.0) {
    FockVector psi(u.space());
    psi.terms_.push_back({coef, u});
    psi.normalize();
    return psi;
  }

  static FockVector vacuum(SpacePtr space) { return exponential(Argument(std::move(space))); }

  const SpacePtr& space() const { return space_; }
  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  void add_term(Complex coef, const Argument& arg) {
    if (!space_) space_ = arg.space();
    require_same_space(space_, arg.space());
    terms_.push_back({coef, arg});
  }

  /// Merge identical arguments (exact match of canonical entries) and drop zero coefficients.
  void normalize() {
    auto less = [](const Argument& a, const Argument& b) { return detail::entries_less<Key>(a.entries(), b.entries()); };
    std::map<Argument, Complex, decltype(less)> merged(less);
    for (auto& t : terms_) {
      t.arg.canonicalize();
      merged[t.arg] += t.coef;
    }
    terms_.clear();
    for (auto& [arg, coef] : merged)
      if (coef != Complex{}) terms_.push_back({coef, arg});
  }

  FockVector& operator+=(const FockVector& other) {
    if (!space_) space_ = other.space_;
    if (!other.is_zero()) require_same_space(space_, other.space_);
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    normalize();
    return *this;
  }

  FockVector& operator-=(const FockVector& other) {
    if (!space_) space_ = other.space_;
    if (!other.is_zero()) require_same_space(space_, other.space_);
    for (const auto& t : other.terms_) terms_.push_back({-t.coef, t.arg});
    normalize();
    return *this;
  }

  FockVector& operator*=(Complex z) {
    for (auto& t : terms_) t.coef *= z;
    normalize();
    return *this;
  }

  friend FockVector operator+(FockVector a, const FockVector& b) { return a += b; }
  friend FockVector operator-(FockVector a, const FockVector& b) { return a -= b; }
  friend FockVector operator*(Complex z, FockVector a) { return a *= z; }

  /// Identify arguments that agree to `tol`. The represented vector moves by at most
  /// O(tol * |c| * ||e(u)||), far below every residual threshold in the toolkit.
  FockVector merged_close(double tol = kArgumentMergeTolerance) const {
    FockVector out(space_);
    for (const auto& t : terms_) {
      bool placed = false;
      for (auto& o : out.terms_) {
        if (detail::entries_close<Key>(o.arg.entries(), t.arg.entries(), tol)) {
          o.coef += t.coef;
          placed = true;
          break;
        }
      }
      if (!placed) out.terms_.push_back(t);
    }
    std::erase_if(out.terms_, [](const Term& t) { return t.coef == Complex{}; });
    return out;
  }

 private:
  SpacePtr space_;
  std::vector<Term> terms_;
};

template <class Key>
Complex fock_inner(const FockVector<Key>& psi, const FockVector<Key>& phi) {
  if (psi.is_zero() || phi.is_zero()) return {};
  require_same_space(psi.space(), phi.space());
  Complex s{};
  for (const auto& a : psi.terms())
    for (const auto& b : phi.terms()) s += std::conj(a.coef) * b.coef * exp_inner(a.arg, b.arg);
  return s;
}

template <class Key>
double fock_norm(const FockVector<Key>& psi) {
  return std::sqrt(std::max(0.0, fock_inner(psi, psi).real()));
}

/// ||psi - phi||, with near-identical arguments identified before the Gram sum.
template <class Key>
double fock_distance(const FockVector<Key>& psi, const FockVector<Key>& phi) {
  return fock_norm((psi - phi).merged_close());
}

/// W(u) e(v) = exp(-||u||^2/2 - <u|v>) e(u + v).
template <class Key>
FockVector<Key> weyl_apply(const OneParticleVector<Key>& u, const FockVector<Key>& psi) {
  if (psi.is_zero()) return psi;
  require_same_space(u.space(), psi.space());
  if (u.is_zero()) return psi;
  const double half_norm = 0.5 * norm_sq(u);
  FockVector<Key> out(psi.space());
  for (const auto& t : psi.terms()) {
    const Complex factor = detail::guarded_exp(-half_norm - inner(u, t.arg));
    out.add_term(t.coef * factor, u + t.arg);
  }
  out.normalize();
  return out;
}

/// Second quantization: e(v) -> e(L v), after checking that L preserves the Gram
/// data of the arguments present in psi.
template <class Key, class LinearMap>
FockVector<Key> gamma_apply(const LinearMap& map, const FockVector<Key>& psi, double tol = 1e-12) {
  const auto& terms = psi.terms();
  std::vector<OneParticleVector<Key>> images;
  images.reserve(terms.size());
  for (const auto& t : terms) images.push_back(map(t.arg));
  for (std::size_t i = 0; i < terms.size(); ++i) {
    for (std::size_t j = i; j < terms.size(); ++j) {
      const Complex before = inner(terms[i].arg, terms[j].arg);
      const Complex after = inner(images[i], images[j]);
      if (std::abs(after - before) > tol * std::max(1.0, std::abs(before)))
        throw Error(ErrorKind::NotIsometricOnSupport,
                    "Gram entry changed by " + std::to_string(std::abs(after - before)));
    }
  }
  FockVector<Key> out(images.empty() ? psi.space() : images.front().space());
  for (std::size_t i = 0; i < terms.size(); ++i) out.add_term(terms[i].coef, images[i]);
  out.normalize();
  return out;
}

/// Image of a Fock vector under Gamma(K1 + K2) = Gamma(K1) (x) Gamma(K2).
template <class Key>
struct SplitVector {
  struct Term {
    Complex coef;
    OneParticleVector<Key> left;
    OneParticleVector<Key> right;
  };
  std::vector<Term> terms;
};

/// `side(key)` returns 0 or 1 for the summand holding the site, or nullopt if unassigned.
template <class Key, class Classifier>
SplitVector<Key> tensor_split(const FockVector<Key>& psi, const Classifier& side) {
  SplitVector<Key> out;
  for (const auto& t : psi.terms()) {
    OneParticleVector<Key> left(t.arg.space());
    OneParticleVector<Key> right(t.arg.space());
    for (const auto& [key, value] : t.arg.entries()) {
      const std::optional<int> s = side(key);
      if (!s || (*s != 0 && *s != 1)) throw Error(ErrorKind::BadPartition, "site not assigned to a summand");
      (*s == 0 ? left : right).add(key, value);
    }
    out.terms.push_back({t.coef, std::move(left), std::move(right)});
  }
  return out;
}

/// Inner product on Gamma(K1) (x) Gamma(K2) in product form.
template <class Key>
Complex split_inner(const SplitVector<Key>& a, const SplitVector<Key>& b) {
  Complex s{};
  for (const auto& x : a.terms)
    for (const auto& y : b.terms)
      s += std::conj(x.coef) * y.coef * exp_inner(x.left, y.left) * exp_inner(x.right, y.right);
  return s;
}

/// max over the test set of ||(W(u)W(v) - e^{-i Im<u|v>} W(u+v)) psi|| / max(||psi||, 1).
template <class Key>
double ccr_residual(const OneParticleVector<Key>& u, const OneParticleVector<Key>& v,
                    const std::vector<FockVector<Key>>& testset) {
  const Complex phase = std::exp(Complex(0.0, -inner(u, v).imag()));
  const OneParticleVector<Key> sum = u + v;
  double worst = 0.0;
  for (const auto& psi : testset) {
    const FockVector<Key> lhs = weyl_apply(u, weyl_apply(v, psi));
    const FockVector<Key> rhs = phase * weyl_apply(sum, psi);
    worst = std::max(worst, fock_distance(lhs, rhs) / std::max(fock_norm(psi), 1.0));
  }
  return worst;
}

}  // namespace coneflow

#endif  // CONEFLOW_FOCK_HPP
