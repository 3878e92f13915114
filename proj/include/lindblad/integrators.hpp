#pragma once

#include "lindblad/model.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace lindblad {

enum class IntegratorKind { KrausFirstOrder, DilatedHamiltonian };

inline std::string_view to_string(IntegratorKind kind) {
  return kind == IntegratorKind::KrausFirstOrder ? "kraus" : "dilated";
}

inline IntegratorKind integrator_from_string(std::string_view s) {
  if (s == "kraus" || s == "KrausFirstOrder") return IntegratorKind::KrausFirstOrder;
  if (s == "dilated" || s == "DilatedHamiltonian") return IntegratorKind::DilatedHamiltonian;
  throw Error(ErrorCode::Parse, "unknown integrator '" + std::string(s) + "' (expected kraus|dilated)");
}

/// A completely positive map rho -> Sum_k K_k rho K_k^dagger.
class KrausChannel {
 public:
  explicit KrausChannel(std::vector<ComplexMatrix> ops) : ops_(std::move(ops)) {}

  ComplexMatrix apply(const ComplexMatrix& rho) const {
    ComplexMatrix out = ComplexMatrix::Zero(rho.rows(), rho.cols());
    for (const auto& k : ops_) out.noalias() += k * rho * k.adjoint();
    return out;
  }

  const std::vector<ComplexMatrix>& operators() const { return ops_; }

 private:
  std::vector<ComplexMatrix> ops_;
};

namespace detail {

inline void require_positive_tau(double tau) {
  require(tau > 0.0 && std::isfinite(tau), ErrorCode::InvalidArgument, "step size tau must be positive");
}

}  // namespace detail

/// Kraus operators F_0 = I + tau A and F_j = sqrt(tau) L_j.
inline KrausChannel kraus_channel(const LindbladModel& model, double tau) {
  detail::require_positive_tau(tau);
  const Index d = model.dim();
  std::vector<ComplexMatrix> ops;
  ops.reserve(model.jump_count() + 1);
  ops.push_back(ComplexMatrix::Identity(d, d) + tau * model.effective());
  const double s = std::sqrt(tau);
  for (const auto& l : model.jumps()) ops.push_back(s * l);
  return KrausChannel(std::move(ops));
}

/// One first-order Kraus step; not trace-renormalized.
inline ComplexMatrix kraus_step(const LindbladModel& model, const ComplexMatrix& rho, double tau) {
  detail::require_same_dim(rho, model.dim(), "kraus_step");
  return kraus_channel(model, tau).apply(rho);
}

/// Dilated Hamiltonian tau H_0 + sqrt(tau) H_1 on ancilla (J+1) x system.
/// Ancilla is the major (block) index: block (a, b) is the system operator
/// <a| H |b>.
inline ComplexMatrix dilated_hamiltonian(const LindbladModel& model, double tau) {
  detail::require_positive_tau(tau);
  const Index d = model.dim();
  const Index na = static_cast<Index>(model.jump_count()) + 1;
  const double eps = std::sqrt(tau);
  ComplexMatrix h = ComplexMatrix::Zero(na * d, na * d);
  h.block(0, 0, d, d) = tau * model.hamiltonian();
  for (Index j = 1; j < na; ++j) {
    const auto& l = model.jumps()[static_cast<std::size_t>(j - 1)];
    h.block(j * d, 0, d, d) = eps * l;
    h.block(0, j * d, d, d) = eps * l.adjoint();
  }
  return h;
}

/// Sum_j <j|_A m |j>_A for m on (d_ancilla * d_system) with ancilla major.
inline ComplexMatrix partial_trace_ancilla(const ComplexMatrix& m, Index d_ancilla, Index d_system) {
  detail::require(d_ancilla >= 1 && d_system >= 1 && m.rows() == d_ancilla * d_system &&
                      m.cols() == m.rows(),
                  ErrorCode::DimensionMismatch, "partial_trace_ancilla: dimension factorization mismatch");
  ComplexMatrix out = ComplexMatrix::Zero(d_system, d_system);
  for (Index a = 0; a < d_ancilla; ++a) out += m.block(a * d_system, a * d_system, d_system, d_system);
  return out;
}

/// The dilated step as a Kraus channel: E_j = <j|_A U |0>_A, U = exp(-i H).
inline KrausChannel dilated_channel(const LindbladModel& model, double tau) {
  const ComplexMatrix u = unitary_from_hermitian(dilated_hamiltonian(model, tau));
  const Index d = model.dim();
  const Index na = static_cast<Index>(model.jump_count()) + 1;
  std::vector<ComplexMatrix> ops;
  ops.reserve(static_cast<std::size_t>(na));
  for (Index j = 0; j < na; ++j) ops.push_back(u.block(j * d, 0, d, d));
  return KrausChannel(std::move(ops));
}

/// tr_A(U (|0><0| (x) rho) U^dagger) evaluated on the full dilated space.
inline ComplexMatrix dilated_step(const LindbladModel& model, const ComplexMatrix& rho, double tau) {
  detail::require_same_dim(rho, model.dim(), "dilated_step");
  const ComplexMatrix u = unitary_from_hermitian(dilated_hamiltonian(model, tau));
  const Index d = model.dim();
  const Index na = static_cast<Index>(model.jump_count()) + 1;
  ComplexMatrix big = ComplexMatrix::Zero(na * d, na * d);
  big.topLeftCorner(d, d) = rho;
  return partial_trace_ancilla(u * big * u.adjoint(), na, d);
}

inline DensityMatrix dilated_step(const LindbladModel& model, const DensityMatrix& rho, double tau) {
  return DensityMatrix(dilated_step(model, rho.matrix(), tau));
}

inline KrausChannel step_channel(const LindbladModel& model, double tau, IntegratorKind kind) {
  return kind == IntegratorKind::KrausFirstOrder ? kraus_channel(model, tau) : dilated_channel(model, tau);
}

/// Coefficients rho^{(k)}, k = 0..k_max, of the epsilon-series of
/// U(eps) (|0><0| (x) x) U(eps)^dagger on the dilated space, with
/// H(eps) = eps^2 H_0 + eps H_1. Linear in x.
///
/// Words of m commutators with total epsilon-weight k are accumulated in
/// table(m, k) = ad_{H_1} table(m-1, k-1) + ad_{H_0} table(m-1, k-2), and
/// rho^{(k)} = Sum_m (-i)^m / m! table(m, k).
inline std::vector<ComplexMatrix> dilation_series(const LindbladModel& model, const ComplexMatrix& x,
                                                  int k_max) {
  detail::require(k_max >= 0, ErrorCode::InvalidArgument, "dilation_series: k_max must be >= 0");
  detail::require_same_dim(x, model.dim(), "dilation_series");
  const Index d = model.dim();
  const Index na = static_cast<Index>(model.jump_count()) + 1;
  const Index n = na * d;
  ComplexMatrix h0 = ComplexMatrix::Zero(n, n);
  h0.topLeftCorner(d, d) = model.hamiltonian();
  ComplexMatrix h1 = ComplexMatrix::Zero(n, n);
  for (Index j = 1; j < na; ++j) {
    const auto& l = model.jumps()[static_cast<std::size_t>(j - 1)];
    h1.block(j * d, 0, d, d) = l;
    h1.block(0, j * d, d, d) = l.adjoint();
  }
  auto ad = [](const ComplexMatrix& h, const ComplexMatrix& y) -> ComplexMatrix { return h * y - y * h; };

  const auto km = static_cast<std::size_t>(k_max);
  // table[m][k]; only entries with m <= k <= 2m are nonzero.
  std::vector<std::vector<std::optional<ComplexMatrix>>> table(km + 1,
                                                               std::vector<std::optional<ComplexMatrix>>(km + 1));
  ComplexMatrix rho0 = ComplexMatrix::Zero(n, n);
  rho0.topLeftCorner(d, d) = x;
  table[0][0] = rho0;
  for (std::size_t m = 1; m <= km; ++m) {
    for (std::size_t k = m; k <= std::min(km, 2 * m); ++k) {
      ComplexMatrix acc = ComplexMatrix::Zero(n, n);
      bool any = false;
      if (table[m - 1][k - 1]) {
        acc += ad(h1, *table[m - 1][k - 1]);
        any = true;
      }
      if (k >= 2 && table[m - 1][k - 2]) {
        acc += ad(h0, *table[m - 1][k - 2]);
        any = true;
      }
      if (any) table[m][k] = std::move(acc);
    }
  }
  std::vector<ComplexMatrix> series(km + 1, ComplexMatrix::Zero(n, n));
  double inv_fact = 1.0;
  Complex phase(1.0, 0.0);
  for (std::size_t m = 0; m <= km; ++m) {
    if (m > 0) {
      inv_fact /= static_cast<double>(m);
      phase *= -kI;
    }
    for (std::size_t k = m; k <= std::min(km, 2 * m); ++k)
      if (table[m][k]) series[k] += (phase * inv_fact) * *table[m][k];
  }
  return series;
}

/// Taylor coefficient M_n of the one-step map K(tau) = Sum_n tau^n M_n,
/// applied to x. Kraus: M_0 = I, M_1 = L, M_2 x = A x A^dagger, M_n = 0 for
/// n >= 3. Dilated: M_n x = tr_A(rho^{(2n)}).
inline ComplexMatrix step_expansion_term(const LindbladModel& model, IntegratorKind kind, int n,
                                         const ComplexMatrix& x) {
  detail::require(n >= 0, ErrorCode::InvalidArgument, "step_expansion_term: n must be >= 0");
  detail::require_same_dim(x, model.dim(), "step_expansion_term");
  if (kind == IntegratorKind::KrausFirstOrder) {
    switch (n) {
      case 0:
        return x;
      case 1:
        return lindblad_apply(model, x);
      case 2:
        return model.effective() * x * model.effective().adjoint();
      default:
        return ComplexMatrix::Zero(x.rows(), x.cols());
    }
  }
  const auto series = dilation_series(model, x, 2 * n);
  return partial_trace_ancilla(series[static_cast<std::size_t>(2 * n)],
                               static_cast<Index>(model.jump_count()) + 1, model.dim());
}

struct EvolveOptions {
  /// 0 stores only the final state; s > 0 also stores step 0 and every s-th step.
  std::size_t snapshot_every = 0;
  /// Divide by the trace after each step. Physical post-processing only.
  bool normalize_trace = false;
  const Observable* observable = nullptr;
};

struct Snapshot {
  std::size_t step_index = 0;
  double time = 0.0;
  double trace = 0.0;
  std::optional<double> observable_value;
  ComplexMatrix state;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  double tau = 0.0;
  std::size_t n_steps = 0;
  double total_time = 0.0;
  double trace_drift = 0.0;
  IntegratorKind kind = IntegratorKind::KrausFirstOrder;

  const ComplexMatrix& final_state() const { return snapshots.back().state; }
};

/// rho_n = K(tau)^n rho_0 with tau = T / n_steps.
inline Trajectory evolve(const LindbladModel& model, const ComplexMatrix& rho0, double T, std::size_t n_steps,
                         IntegratorKind kind, const EvolveOptions& options = {}) {
  detail::require(n_steps >= 1, ErrorCode::InvalidArgument, "evolve: n_steps must be >= 1");
  detail::require(T > 0.0 && std::isfinite(T), ErrorCode::InvalidArgument, "evolve: T must be positive");
  detail::require_same_dim(rho0, model.dim(), "evolve");
  if (options.observable) detail::require_same_dim(options.observable->matrix(), model.dim(), "evolve observable");

  Trajectory traj;
  traj.tau = T / static_cast<double>(n_steps);
  traj.n_steps = n_steps;
  traj.total_time = T;
  traj.kind = kind;
  const KrausChannel channel = step_channel(model, traj.tau, kind);

  auto record = [&](std::size_t step, const ComplexMatrix& rho, double tr) {
    Snapshot s;
    s.step_index = step;
    s.time = step == n_steps ? T : traj.tau * static_cast<double>(step);
    s.trace = tr;
    if (options.observable) s.observable_value = expectation(rho, *options.observable);
    s.state = rho;
    traj.snapshots.push_back(std::move(s));
  };

  ComplexMatrix rho = rho0;
  const double tr0 = rho.trace().real();
  traj.trace_drift = std::abs(tr0 - 1.0);
  if (options.snapshot_every > 0) record(0, rho, tr0);
  for (std::size_t step = 1; step <= n_steps; ++step) {
    rho = channel.apply(rho);
    double tr = rho.trace().real();
    traj.trace_drift = std::max(traj.trace_drift, std::abs(tr - 1.0));
    if (options.normalize_trace) {
      rho /= tr;
      tr = 1.0;
    }
    const bool last = step == n_steps;
    if (last || (options.snapshot_every > 0 && step % options.snapshot_every == 0)) record(step, rho, tr);
  }
  return traj;
}

inline Trajectory evolve(const LindbladModel& model, const DensityMatrix& rho0, double T, std::size_t n_steps,
                         IntegratorKind kind, const EvolveOptions& options = {}) {
  return evolve(model, rho0.matrix(), T, n_steps, kind, options);
}

/// CSV with columns step_index,time,trace[,observable_value].
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const bool with_obs = !traj.snapshots.empty() && traj.snapshots.front().observable_value.has_value();
  os << "step_index,time,trace" << (with_obs ? ",observable_value" : "") << '\n';
  const auto old_prec = os.precision(17);
  for (const auto& s : traj.snapshots) {
    os << s.step_index << ',' << s.time << ',' << s.trace;
    if (with_obs) os << ',' << *s.observable_value;
    os << '\n';
  }
  os.precision(old_prec);
}

}  // namespace lindblad
