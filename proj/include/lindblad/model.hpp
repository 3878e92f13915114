#pragma once

#include "lindblad/core.hpp"

#include <json.hpp>

#include <utility>
#include <vector>

namespace lindblad {

/// Hamiltonian plus jump operators. Rates are absorbed into the jumps.
/// Immutable after construction.
class LindbladModel {
 public:
  LindbladModel(ComplexMatrix hamiltonian, std::vector<ComplexMatrix> jumps,
                double tol_herm = kDefaultTolerances.herm)
      : hamiltonian_(std::move(hamiltonian)), jumps_(std::move(jumps)) {
    detail::require_square_finite(hamiltonian_, "LindbladModel hamiltonian");
    detail::require(hermiticity_defect(hamiltonian_) <= tol_herm, ErrorCode::InvalidArgument,
                    "LindbladModel: hamiltonian is not Hermitian within tolerance");
    const Index d = hamiltonian_.rows();
    jump_sum_ = ComplexMatrix::Zero(d, d);
    for (const auto& l : jumps_) {
      detail::require_square_finite(l, "LindbladModel jump");
      detail::require_same_dim(l, d, "LindbladModel jump");
      jump_sum_ += l.adjoint() * l;
    }
    effective_ = -kI * hamiltonian_ - 0.5 * jump_sum_;
  }

  Index dim() const { return hamiltonian_.rows(); }
  const ComplexMatrix& hamiltonian() const { return hamiltonian_; }
  const std::vector<ComplexMatrix>& jumps() const { return jumps_; }
  std::size_t jump_count() const { return jumps_.size(); }

  /// Sum_j L_j^dagger L_j.
  const ComplexMatrix& jump_sum() const { return jump_sum_; }
  /// Non-Hermitian effective generator A = -iH - (1/2) Sum_j L_j^dagger L_j.
  const ComplexMatrix& effective() const { return effective_; }

 private:
  ComplexMatrix hamiltonian_;
  std::vector<ComplexMatrix> jumps_;
  ComplexMatrix jump_sum_;
  ComplexMatrix effective_;
};

/// Hermitian, unit-trace, positive semidefinite matrix. Construction checks
/// the invariants against the supplied tolerances.
class DensityMatrix {
 public:
  explicit DensityMatrix(ComplexMatrix m, const Tolerances& tol = kDefaultTolerances) : m_(std::move(m)) {
    detail::require_square_finite(m_, "DensityMatrix");
    detail::require(hermiticity_defect(m_) <= tol.herm, ErrorCode::InvalidState,
                    "DensityMatrix: not Hermitian within tolerance");
    const double tr_err = std::abs(m_.trace() - Complex(1.0, 0.0));
    detail::require(tr_err <= tol.trace, ErrorCode::InvalidState,
                    "DensityMatrix: trace deviates from 1 by " + std::to_string(tr_err));
    const double lam = min_eigenvalue_hermitian(m_);
    detail::require(lam >= -tol.psd, ErrorCode::InvalidState,
                    "DensityMatrix: negative eigenvalue " + std::to_string(lam));
  }

  static DensityMatrix pure(const ComplexVector& psi) {
    const ComplexVector n = psi / psi.norm();
    return DensityMatrix(n * n.adjoint());
  }

  static DensityMatrix maximally_mixed(Index dim) {
    return DensityMatrix(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
  }

  Index dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }

 private:
  ComplexMatrix m_;
};

/// Hermitian observable with its spectral-norm bound (the Hoeffding range).
class Observable {
 public:
  explicit Observable(ComplexMatrix m, double tol_herm = kDefaultTolerances.herm) : m_(std::move(m)) {
    detail::require_square_finite(m_, "Observable");
    detail::require(hermiticity_defect(m_) <= tol_herm, ErrorCode::InvalidArgument,
                    "Observable: not Hermitian within tolerance");
    bound_alpha_ = spectral_norm(m_);
  }

  Index dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }
  double bound_alpha() const { return bound_alpha_; }

 private:
  ComplexMatrix m_;
  double bound_alpha_ = 0.0;
};

/// L(a) = -i[H,a] + Sum_j (L_j a L_j^dagger - (1/2){L_j^dagger L_j, a}).
inline ComplexMatrix lindblad_apply(const LindbladModel& model, const ComplexMatrix& a) {
  detail::require_same_dim(a, model.dim(), "lindblad_apply");
  const ComplexMatrix& eff = model.effective();
  ComplexMatrix out = eff * a + a * eff.adjoint();
  for (const auto& l : model.jumps()) out.noalias() += l * a * l.adjoint();
  return out;
}

/// Closed-form d^2 x d^2 matrix of the generator in column-stacking convention.
inline ComplexMatrix generator_matrix(const LindbladModel& model) {
  const Index d = model.dim();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  const ComplexMatrix& eff = model.effective();
  ComplexMatrix s = kron(id, eff) + kron(eff.conjugate(), id);
  for (const auto& l : model.jumps()) s += kron(l.conjugate(), l);
  return s;
}

/// l = 2||H|| + 2 Sum_j ||L_j||^2 (spectral norms).
inline double generator_bound(const LindbladModel& model) {
  double l = 2.0 * spectral_norm(model.hamiltonian());
  for (const auto& j : model.jumps()) {
    const double n = spectral_norm(j);
    l += 2.0 * n * n;
  }
  return l;
}

inline double expectation(const ComplexMatrix& rho, const Observable& obs) {
  detail::require_same_dim(rho, obs.dim(), "expectation");
  return (rho.cwiseProduct(obs.matrix().transpose())).sum().real();
}

/// Re Tr(rho O).
inline double expectation(const DensityMatrix& rho, const Observable& obs) {
  return expectation(rho.matrix(), obs);
}

/// Model whose generator is T times the original: H -> T H, L_j -> sqrt(T) L_j.
inline LindbladModel rescale_model(const LindbladModel& model, double T) {
  detail::require(T > 0.0 && std::isfinite(T), ErrorCode::InvalidArgument,
                  "rescale_model: T must be positive");
  std::vector<ComplexMatrix> jumps;
  jumps.reserve(model.jump_count());
  const double s = std::sqrt(T);
  for (const auto& l : model.jumps()) jumps.push_back(s * l);
  return LindbladModel(T * model.hamiltonian(), std::move(jumps));
}

// JSON: matrices are row-major arrays of [re, im] pairs.

inline nlohmann::json matrix_to_json(const ComplexMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ComplexMatrix matrix_from_json(const nlohmann::json& j, Index dim) {
  detail::require(j.is_array() && static_cast<Index>(j.size()) == dim, ErrorCode::Parse,
                  "matrix JSON: expected " + std::to_string(dim) + " rows");
  ComplexMatrix m(dim, dim);
  for (Index r = 0; r < dim; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    detail::require(row.is_array() && static_cast<Index>(row.size()) == dim, ErrorCode::Parse,
                    "matrix JSON: row " + std::to_string(r) + " has wrong length");
    for (Index c = 0; c < dim; ++c) {
      const auto& e = row[static_cast<std::size_t>(c)];
      detail::require(e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number(),
                      ErrorCode::Parse, "matrix JSON: entries must be [re, im]");
      m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

inline nlohmann::json model_to_json(const LindbladModel& model) {
  nlohmann::json jumps = nlohmann::json::array();
  for (const auto& l : model.jumps()) jumps.push_back(matrix_to_json(l));
  return {{"dim", model.dim()}, {"hamiltonian", matrix_to_json(model.hamiltonian())}, {"jumps", jumps}};
}

inline LindbladModel model_from_json(const nlohmann::json& j) {
  detail::require(j.is_object() && j.contains("dim") && j.contains("hamiltonian"), ErrorCode::Parse,
                  "model JSON: requires 'dim' and 'hamiltonian'");
  const auto dim = j.at("dim").get<Index>();
  detail::require(dim >= 1, ErrorCode::Parse, "model JSON: dim must be positive");
  std::vector<ComplexMatrix> jumps;
  if (j.contains("jumps")) {
    detail::require(j.at("jumps").is_array(), ErrorCode::Parse, "model JSON: 'jumps' must be an array");
    for (const auto& l : j.at("jumps")) jumps.push_back(matrix_from_json(l, dim));
  }
  return LindbladModel(matrix_from_json(j.at("hamiltonian"), dim), std::move(jumps));
}

}  // namespace lindblad
