#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>

namespace lindblad {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr Complex kI{0.0, 1.0};

/// Numerical tolerances used by the invariant checks. The defaults are
/// double-precision choices; callers may tighten or relax them per call.
struct Tolerances {
  double herm = 1e-10;
  double trace = 1e-10;
  double psd = 1e-8;
  double eig = 1e-9;
};

inline constexpr Tolerances kDefaultTolerances{};

enum class ErrorCode {
  DimensionMismatch,
  InvalidArgument,
  InvalidState,
  Unsupported,
  NumericalFailure,
  Parse,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

inline void require_square_finite(const ComplexMatrix& a, const char* what) {
  require(a.rows() >= 1 && a.rows() == a.cols(), ErrorCode::InvalidArgument,
          std::string(what) + ": matrix must be square with dim >= 1");
  require(a.allFinite(), ErrorCode::InvalidArgument, std::string(what) + ": non-finite entry");
}

inline void require_same_dim(const ComplexMatrix& a, Index dim, const char* what) {
  require(a.rows() == dim && a.cols() == dim, ErrorCode::DimensionMismatch,
          std::string(what) + ": expected dim " + std::to_string(dim) + ", got " +
              std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

}  // namespace detail

inline double hermiticity_defect(const ComplexMatrix& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

inline ComplexMatrix hermitian_part(const ComplexMatrix& a) { return 0.5 * (a + a.adjoint()); }

/// Largest singular value, from the Hermitian eigendecomposition of A^dagger A.
inline double spectral_norm(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a.adjoint() * a, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

/// Schatten 1-norm (sum of singular values).
inline double trace_norm(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<ComplexMatrix> svd(a);
  return svd.singularValues().sum();
}

inline double min_eigenvalue_hermitian(const ComplexMatrix& a) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Column-stacking vectorization: vec(A X B) = (B^T kron A) vec(X).
inline ComplexVector vec(const ComplexMatrix& x) {
  return Eigen::Map<const ComplexVector>(x.data(), x.size());
}

inline ComplexMatrix unvec(const ComplexVector& v, Index dim) {
  return Eigen::Map<const ComplexMatrix>(v.data(), dim, dim);
}

/// Builds the d^2 x d^2 matrix of a linear map on d x d matrices by applying
/// it to each matrix unit E_{ij}.
inline ComplexMatrix superoperator_matrix(const std::function<ComplexMatrix(const ComplexMatrix&)>& map,
                                          Index dim) {
  ComplexMatrix out(dim * dim, dim * dim);
  ComplexMatrix unit = ComplexMatrix::Zero(dim, dim);
  for (Index col = 0; col < dim; ++col)
    for (Index row = 0; row < dim; ++row) {
      unit(row, col) = 1.0;
      out.col(col * dim + row) = vec(map(unit));
      unit(row, col) = 0.0;
    }
  return out;
}

namespace detail {

inline ComplexMatrix pade_solve(const ComplexMatrix& u, const ComplexMatrix& v) {
  Eigen::PartialPivLU<ComplexMatrix> lu(v - u);
  return lu.solve(v + u);
}

}  // namespace detail

/// Matrix exponential by scaling and squaring with diagonal Pade
/// approximants of degree 3..13 (Higham 2005 thresholds, 1-norm).
inline ComplexMatrix expm(const ComplexMatrix& a) {
  detail::require(a.rows() == a.cols(), ErrorCode::InvalidArgument, "expm: square matrix required");
  detail::require(a.allFinite(), ErrorCode::NumericalFailure, "expm: non-finite input");
  const Index n = a.rows();
  if (n == 0) return a;
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();

  static constexpr std::array<double, 4> kTheta = {1.495585217958292e-2, 2.539398330063230e-1,
                                                   9.504178996162932e-1, 2.097847961257068e0};
  static constexpr double kTheta13 = 5.371920351148152;

  if (norm1 <= kTheta[3]) {
    const ComplexMatrix a2 = a * a;
    ComplexMatrix u, v;
    if (norm1 <= kTheta[0]) {
      constexpr double b[] = {120.0, 60.0, 12.0, 1.0};
      u = a * (b[3] * a2 + b[1] * id);
      v = b[2] * a2 + b[0] * id;
    } else if (norm1 <= kTheta[1]) {
      constexpr double b[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
      const ComplexMatrix a4 = a2 * a2;
      u = a * (b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[4] * a4 + b[2] * a2 + b[0] * id;
    } else if (norm1 <= kTheta[2]) {
      constexpr double b[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                              25200.0,    1512.0,    56.0,      1.0};
      const ComplexMatrix a4 = a2 * a2;
      const ComplexMatrix a6 = a4 * a2;
      u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    } else {
      constexpr double b[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                              2162160.0,     110880.0,     3960.0,       90.0,        1.0};
      const ComplexMatrix a4 = a2 * a2;
      const ComplexMatrix a6 = a4 * a2;
      const ComplexMatrix a8 = a6 * a2;
      u = a * (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    }
    return detail::pade_solve(u, v);
  }

  const int s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / kTheta13))));
  const ComplexMatrix as = a * std::ldexp(1.0, -s);
  constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                          1187353796428800.0,  129060195264000.0,   10559470521600.0,
                          670442572800.0,      33522128640.0,       1323241920.0,
                          40840800.0,          960960.0,            16380.0,
                          182.0,               1.0};
  const ComplexMatrix a2 = as * as;
  const ComplexMatrix a4 = a2 * a2;
  const ComplexMatrix a6 = a4 * a2;
  const ComplexMatrix u =
      as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  const ComplexMatrix v =
      a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  ComplexMatrix r = detail::pade_solve(u, v);
  for (int k = 0; k < s; ++k) r = (r * r).eval();
  detail::require(r.allFinite(), ErrorCode::NumericalFailure, "expm: overflow during squaring");
  return r;
}

/// exp(-i H) for Hermitian H via eigendecomposition; unitary to machine precision.
inline ComplexMatrix unitary_from_hermitian(const ComplexMatrix& h) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(h));
  detail::require(es.info() == Eigen::Success, ErrorCode::NumericalFailure,
                  "eigendecomposition of Hermitian generator failed");
  const auto& vals = es.eigenvalues();
  ComplexVector phases(vals.size());
  for (Index k = 0; k < vals.size(); ++k) phases(k) = std::exp(-kI * vals(k));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace lindblad
