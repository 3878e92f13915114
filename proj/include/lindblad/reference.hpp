#pragma once

#include "lindblad/integrators.hpp"

#include <limits>
#include <sstream>

namespace lindblad {

enum class PropagatorMethod { Auto, Exponential, RungeKutta };

struct ReferenceSolution {
  DensityMatrix state;
  double time = 0.0;
  /// Trace-norm error estimate.
  double est_error = 0.0;
};

struct GammaSolution {
  int k = 1;
  ComplexMatrix value_at_T;
  double time = 0.0;
  double est_error = 0.0;
};

struct OdeResult {
  ComplexVector y;
  double est_error = 0.0;
  std::size_t accepted_steps = 0;
};

/// Dormand-Prince 5(4) with PI step control for y' = f(y) on [0, t_end].
/// `norm_scale` converts the Euclidean norm of a local error vector into the
/// caller's error metric. The controller keeps the sum of accepted local
/// errors below tol.
template <class Rhs>
OdeResult integrate_dopri5(Rhs&& f, ComplexVector y, double t_end, double tol, double norm_scale = 1.0) {
  detail::require(t_end >= 0.0 && tol > 0.0, ErrorCode::InvalidArgument, "integrate_dopri5: bad arguments");
  OdeResult res;
  if (t_end == 0.0) {
    res.y = std::move(y);
    return res;
  }
  constexpr double a21 = 1.0 / 5.0;
  constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                   a54 = -212.0 / 729.0;
  constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                   a65 = -5103.0 / 18656.0;
  constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                   b6 = 11.0 / 84.0;
  constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                   e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

  const double per_time = tol / t_end;
  double t = 0.0;
  double h = std::min(t_end, 1e-3 * t_end + 1e-6);
  double err_prev = 1e-4;
  ComplexVector k1 = f(y);
  const double h_min = 1e-14 * t_end;
  while (t < t_end) {
    if (t + h > t_end) h = t_end - t;
    const ComplexVector k2 = f(y + h * (a21 * k1));
    const ComplexVector k3 = f(y + h * (a31 * k1 + a32 * k2));
    const ComplexVector k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const ComplexVector k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const ComplexVector k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    ComplexVector y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const ComplexVector k7 = f(y_new);
    const double err =
        norm_scale * (h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)).norm();
    const double allowed = per_time * h;
    const double ratio = err / allowed;
    if (ratio <= 1.0) {
      t += h;
      y = std::move(y_new);
      k1 = k7;
      res.est_error += err;
      ++res.accepted_steps;
      const double r = std::max(ratio, 1e-10);
      const double fac = 0.9 * std::pow(r, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      err_prev = r;
      h *= std::clamp(fac, 0.2, 5.0);
    } else {
      h *= std::max(0.2, 0.9 * std::pow(ratio, -1.0 / 5.0));
    }
    detail::require(h >= h_min || t >= t_end, ErrorCode::NumericalFailure,
                    "integrate_dopri5: step size underflow, tolerance unreachable");
  }
  res.y = std::move(y);
  return res;
}

namespace detail {

inline double norm1(const ComplexMatrix& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

inline PropagatorMethod resolve_method(PropagatorMethod m, Index dim) {
  if (m != PropagatorMethod::Auto) return m;
  return dim <= 16 ? PropagatorMethod::Exponential : PropagatorMethod::RungeKutta;
}

// Rounding-error model for an exponential of a (vectorized) linear flow.
inline double expm_error_estimate(double t_norm, Index dim) {
  return 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + t_norm) * std::sqrt(static_cast<double>(dim));
}

}  // namespace detail

/// exp(t L) as a d^2 x d^2 matrix acting on column-stacked states.
inline ComplexMatrix exact_propagator(const LindbladModel& model, double t) {
  detail::require(t >= 0.0 && std::isfinite(t), ErrorCode::InvalidArgument, "exact_propagator: t must be >= 0");
  return expm(t * generator_matrix(model));
}

/// e^{tL} rho0 to trace-norm accuracy tol. The result is not projected onto
/// the PSD cone; violations beyond the tolerances are reported as errors.
inline ReferenceSolution exact_evolve(const LindbladModel& model, const DensityMatrix& rho0, double t, double tol,
                                      PropagatorMethod method = PropagatorMethod::Auto,
                                      const Tolerances& tols = kDefaultTolerances) {
  detail::require(t >= 0.0 && std::isfinite(t), ErrorCode::InvalidArgument, "exact_evolve: t must be >= 0");
  detail::require(tol > 0.0, ErrorCode::InvalidArgument, "exact_evolve: tol must be positive");
  detail::require_same_dim(rho0.matrix(), model.dim(), "exact_evolve");
  if (t == 0.0) return ReferenceSolution{rho0, 0.0, 0.0};

  const Index d = model.dim();
  ComplexMatrix out;
  double est = 0.0;
  if (detail::resolve_method(method, d) == PropagatorMethod::Exponential) {
    const ComplexMatrix s = generator_matrix(model);
    const double tn = t * detail::norm1(s);
    out = unvec(expm(t * s) * vec(rho0.matrix()), d);
    est = detail::expm_error_estimate(tn, d);
  } else {
    auto rhs = [&](const ComplexVector& v) -> ComplexVector { return vec(lindblad_apply(model, unvec(v, d))); };
    const OdeResult r = integrate_dopri5(rhs, vec(rho0.matrix()), t, 0.5 * tol, std::sqrt(static_cast<double>(d)));
    out = unvec(r.y, d);
    est = r.est_error;
  }
  if (!(est <= tol)) {
    std::ostringstream msg;
    msg.precision(3);
    msg << "exact_evolve: tolerance " << tol << " unreachable (estimate " << est << ")";
    throw Error(ErrorCode::NumericalFailure, msg.str());
  }
  try {
    return ReferenceSolution{DensityMatrix(std::move(out), tols), t, est};
  } catch (const Error& e) {
    throw Error(ErrorCode::NumericalFailure, std::string("exact_evolve: invalid output state: ") + e.what());
  }
}

/// Block generator of the coupled linear system (rho, Gamma_1, ..., Gamma_k)
/// obtained by matching powers of tau in rho_tau(t + tau) = K(tau) rho_tau(t).
/// With D = M_2 - L^2/2:
///   Gamma_1' = L Gamma_1 + D rho
///   Gamma_2' = L Gamma_2 + (M_2 - L^2/2) Gamma_1
///              + (M_3 - L^3/6 - (L D + D L)/2) rho
inline ComplexMatrix gamma_block_generator(const LindbladModel& model, IntegratorKind kind, int k) {
  detail::require(k >= 1, ErrorCode::InvalidArgument, "gamma: k must be >= 1");
  detail::require(k <= 2, ErrorCode::Unsupported, "gamma: only k <= 2 is supported");
  const Index d = model.dim();
  const Index n = d * d;
  const ComplexMatrix s_l = generator_matrix(model);
  const ComplexMatrix s_m2 = superoperator_matrix(
      [&](const ComplexMatrix& x) { return step_expansion_term(model, kind, 2, x); }, d);
  const ComplexMatrix s_l2 = s_l * s_l;
  const ComplexMatrix defect = s_m2 - 0.5 * s_l2;

  ComplexMatrix g = ComplexMatrix::Zero((k + 1) * n, (k + 1) * n);
  for (int b = 0; b <= k; ++b) g.block(b * n, b * n, n, n) = s_l;
  g.block(n, 0, n, n) = defect;
  if (k == 2) {
    const ComplexMatrix s_m3 = superoperator_matrix(
        [&](const ComplexMatrix& x) { return step_expansion_term(model, kind, 3, x); }, d);
    g.block(2 * n, n, n, n) = s_m2 - 0.5 * s_l2;
    g.block(2 * n, 0, n, n) = s_m3 - (s_l2 * s_l) / 6.0 - 0.5 * (s_l * defect + defect * s_l);
  }
  return g;
}

/// Gamma_k(T) of the step-size expansion rho_tau(T) = rho(T) + Sum_k tau^k Gamma_k(T),
/// with Gamma_k(0) = 0.
inline GammaSolution gamma_ode_solve(const LindbladModel& model, IntegratorKind kind, int k, double T,
                                     const DensityMatrix& rho0, double tol,
                                     PropagatorMethod method = PropagatorMethod::Auto,
                                     const Tolerances& tols = kDefaultTolerances) {
  detail::require(k <= 2, ErrorCode::Unsupported, "gamma_ode_solve: k > 2 is not supported");
  detail::require(k >= 1, ErrorCode::InvalidArgument, "gamma_ode_solve: k must be >= 1");
  detail::require(T > 0.0 && std::isfinite(T), ErrorCode::InvalidArgument, "gamma_ode_solve: T must be positive");
  detail::require(tol > 0.0, ErrorCode::InvalidArgument, "gamma_ode_solve: tol must be positive");
  detail::require_same_dim(rho0.matrix(), model.dim(), "gamma_ode_solve");

  const Index d = model.dim();
  const Index n = d * d;
  const ComplexMatrix g = gamma_block_generator(model, kind, k);
  ComplexVector y0 = ComplexVector::Zero(g.rows());
  y0.head(n) = vec(rho0.matrix());

  ComplexVector y;
  double est = 0.0;
  PropagatorMethod m = method;
  if (m == PropagatorMethod::Auto) m = g.rows() <= 256 ? PropagatorMethod::Exponential : PropagatorMethod::RungeKutta;
  if (m == PropagatorMethod::Exponential) {
    const double tn = T * detail::norm1(g);
    y = expm(T * g) * y0;
    est = detail::expm_error_estimate(tn, d) * std::max(1.0, tn);
  } else {
    auto rhs = [&](const ComplexVector& v) -> ComplexVector { return g * v; };
    const OdeResult r = integrate_dopri5(rhs, y0, T, 0.5 * tol, std::sqrt(static_cast<double>(d)));
    y = std::move(r.y);
    est = r.est_error;
  }
  detail::require(est <= tol, ErrorCode::NumericalFailure, "gamma_ode_solve: tolerance unreachable");

  ComplexMatrix gamma = unvec(y.segment(k * n, n), d);
  const double scale = std::max(1.0, gamma.cwiseAbs().maxCoeff());
  detail::require(hermiticity_defect(gamma) <= tols.herm * scale, ErrorCode::NumericalFailure,
                  "gamma_ode_solve: result is not Hermitian");
  return GammaSolution{k, std::move(gamma), T, est};
}

}  // namespace lindblad
