#pragma once

#include "lindblad/model.hpp"
#include "lindblad/sampling.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>

namespace lindblad {

struct TfimParams {
  int n_q = 4;
  double omega = 1.0;
  double omega_r = 0.8;
  double coupling_j = 0.3;
  double gamma = 0.4;
};

struct ModelBundle {
  LindbladModel model;
  Observable observable;
  DensityMatrix initial_state;
};

namespace pauli {

inline ComplexMatrix x() { return (ComplexMatrix(2, 2) << 0, 1, 1, 0).finished(); }
inline ComplexMatrix z() { return (ComplexMatrix(2, 2) << 1, 0, 0, -1).finished(); }
/// |0><1|: lowers |1> to |0>.
inline ComplexMatrix lower() { return (ComplexMatrix(2, 2) << 0, 1, 0, 0).finished(); }

/// op acting on qubit q of n; qubit 0 is the most significant factor.
inline ComplexMatrix on_site(const ComplexMatrix& op, int q, int n) {
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (int s = 0; s < n; ++s) out = kron(out, s == q ? op : ComplexMatrix::Identity(2, 2));
  return out;
}

}  // namespace pauli

/// H = Sum_q (omega/2 Z_q + omega_r/2 X_q) + J Sum_q X_q X_{q+1} (open chain),
/// jumps sqrt(gamma) sigma_-^{(q)}, observable (Sum_q X_q) / n_q, initial |0...0>.
inline ModelBundle build_tfim(const TfimParams& p) {
  detail::require(p.n_q >= 1 && p.n_q <= 12, ErrorCode::InvalidArgument, "build_tfim: n_q must be in [1, 12]");
  detail::require(p.gamma >= 0.0, ErrorCode::InvalidArgument, "build_tfim: gamma must be >= 0");
  const Index d = Index{1} << p.n_q;
  ComplexMatrix h = ComplexMatrix::Zero(d, d);
  ComplexMatrix mx = ComplexMatrix::Zero(d, d);
  std::vector<ComplexMatrix> jumps;
  for (int q = 0; q < p.n_q; ++q) {
    const ComplexMatrix xq = pauli::on_site(pauli::x(), q, p.n_q);
    h += 0.5 * p.omega * pauli::on_site(pauli::z(), q, p.n_q) + 0.5 * p.omega_r * xq;
    if (q + 1 < p.n_q) h += p.coupling_j * xq * pauli::on_site(pauli::x(), q + 1, p.n_q);
    mx += xq;
    jumps.push_back(std::sqrt(p.gamma) * pauli::on_site(pauli::lower(), q, p.n_q));
  }
  ComplexVector psi = ComplexVector::Zero(d);
  psi(0) = 1.0;
  return ModelBundle{LindbladModel(std::move(h), std::move(jumps)), Observable(mx / static_cast<double>(p.n_q)),
                     DensityMatrix::pure(psi)};
}

namespace detail {

inline ComplexMatrix ginibre(Index d, KeyedRng& rng) {
  std::normal_distribution<double> normal;
  ComplexMatrix g(d, d);
  for (Index c = 0; c < d; ++c)
    for (Index r = 0; r < d; ++r) g(r, c) = Complex(normal(rng), normal(rng));
  return g;
}

inline ComplexMatrix with_norm(const ComplexMatrix& m, double target) { return m * (target / spectral_norm(m)); }

}  // namespace detail

/// Seeded random pure state with complex Gaussian amplitudes.
inline DensityMatrix random_pure_state(Index dim, std::uint64_t seed) {
  KeyedRng rng(seed, 0xface, 0);
  std::normal_distribution<double> normal;
  ComplexVector psi(dim);
  for (Index q = 0; q < dim; ++q) psi(q) = Complex(normal(rng), normal(rng));
  return DensityMatrix::pure(psi);
}

/// Complex Ginibre ensemble: H = (G + G^dagger)/2 and each L_j rescaled to
/// spectral norm `scale`; O Hermitized and normalized to norm 1. The initial
/// state is a random pure state from the same seed.
inline ModelBundle random_model(Index dim, int n_jumps, std::uint64_t seed, double scale = 1.0) {
  detail::require(dim >= 2, ErrorCode::InvalidArgument, "random_model: dim must be >= 2");
  detail::require(n_jumps >= 0, ErrorCode::InvalidArgument, "random_model: n_jumps must be >= 0");
  detail::require(scale > 0.0 && std::isfinite(scale), ErrorCode::InvalidArgument, "random_model: scale must be > 0");
  KeyedRng rng(seed, 0x5eed, 0);
  const ComplexMatrix g = detail::ginibre(dim, rng);
  ComplexMatrix h = detail::with_norm(hermitian_part(g), scale);
  h = hermitian_part(h);
  std::vector<ComplexMatrix> jumps;
  for (int j = 0; j < n_jumps; ++j) jumps.push_back(detail::with_norm(detail::ginibre(dim, rng), scale));
  ComplexMatrix o = detail::with_norm(hermitian_part(detail::ginibre(dim, rng)), 1.0);
  o = hermitian_part(o);
  return ModelBundle{LindbladModel(std::move(h), std::move(jumps)), Observable(std::move(o)),
                     random_pure_state(dim, seed)};
}

/// Named entries: "tfim" (default TfimParams, n_q = 4) and "random16"
/// (dim 16, one jump).
inline ModelBundle zoo_model(const std::string& name, std::uint64_t seed = 1, double scale = 1.0) {
  if (name == "tfim") return build_tfim(TfimParams{});
  if (name == "random16") return random_model(16, 1, seed, scale);
  throw Error(ErrorCode::InvalidArgument, "unknown zoo model '" + name + "' (expected tfim|random16)");
}

}  // namespace lindblad
