#ifndef CONEFLOW_RANDOM_HPP
#define CONEFLOW_RANDOM_HPP

// Seeded generators for test vectors. The engine is std::mt19937_64 and doubles are
// formed as (raw >> 11) * 2^-53, so streams are identical across standard libraries.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "coneflow/cone.hpp"
#include "coneflow/fock.hpp"
#include "coneflow/isorep.hpp"

namespace coneflow {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer in [lo, hi].
  int integer(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  Complex complex(double radius = 1.0) { return {uniform(-radius, radius), uniform(-radius, radius)}; }

 private:
  std::mt19937_64 engine_;
};

inline Cell random_cell(Rng& rng, const Box& box) {
  Cell c(box.lo.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = rng.integer(box.lo[i], box.hi[i] - 1);
  return c;
}

/// Random state on up to `nnz` module sites of the box with norm exactly `target_norm`.
inline SparseState random_state(Rng& rng, const GridRep& rep, const Box& box, int nnz, double target_norm) {
  SparseState f(rep.space());
  for (int tries = 0; static_cast<int>(f.support_size()) < nnz && tries < 50 * nnz; ++tries) {
    const int s = rng.integer(0, static_cast<int>(rep.summands().size()) - 1);
    const Cell c = random_cell(rng, box);
    if (!rep.contains_cell(s, c)) continue;
    f.add(Site{s, c, rng.integer(0, rep.summand(s).multiplicity - 1)}, rng.complex());
  }
  const double n = norm(f);
  if (n > 0.0) f *= target_norm / n;
  return f;
}

/// Random one-particle vector with norm drawn uniformly in [0, max_norm].
inline SparseState random_argument(Rng& rng, const GridRep& rep, const Box& box, int nnz, double max_norm) {
  return random_state(rng, rep, box, nnz, rng.uniform(0.0, max_norm));
}

/// Exponential test vector c e(w) with ||c e(w)|| <= 10.
inline GridFockVector random_exponential(Rng& rng, const GridRep& rep, const Box& box, int nnz = 3) {
  // ||e(w)|| = exp(||w||^2 / 2) <= 10  <=>  ||w|| <= sqrt(2 ln 10)
  const SparseState w = random_argument(rng, rep, box, nnz, 0.9 * std::sqrt(2.0 * std::log(10.0)));
  const Complex c = std::polar(1.0, rng.uniform(0.0, 2.0 * M_PI));
  return GridFockVector::exponential(w, c);
}

/// Sum of two exponential vectors, rescaled so the Fock norm stays <= 10.
inline GridFockVector random_fock_vector(Rng& rng, const GridRep& rep, const Box& box, int nnz = 3) {
  GridFockVector psi = random_exponential(rng, rep, box, nnz) + random_exponential(rng, rep, box, nnz);
  const double n = fock_norm(psi);
  if (n > 10.0) psi *= 10.0 / n;
  return psi;
}

/// Haar-like unitary from the QR factor of a random complex matrix.
inline Eigen::MatrixXcd random_unitary(Rng& rng, int k) {
  Eigen::MatrixXcd a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = rng.complex();
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(a);
  return qr.householderQ() * Eigen::MatrixXcd::Identity(k, k);
}

}  // namespace coneflow

#endif  // CONEFLOW_RANDOM_HPP
