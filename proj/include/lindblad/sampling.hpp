#pragma once

#include "lindblad/grids.hpp"
#include "lindblad/integrators.hpp"

#include <atomic>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

namespace lindblad {

/// Counter-based generator: the stream is a pure function of
/// (seed, node, trial), so results do not depend on scheduling.
/// Satisfies UniformRandomBitGenerator.
class KeyedRng {
 public:
  using result_type = std::uint64_t;

  explicit KeyedRng(std::uint64_t seed, std::uint64_t node = 0, std::uint64_t trial = 0)
      : key_(mix(mix(mix(seed ^ 0x243f6a8885a308d3ULL) ^ node) + 0x13198a2e03707344ULL * (trial + 1))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

enum class ShotMode { Born, Gaussian };

inline std::string_view to_string(ShotMode m) { return m == ShotMode::Born ? "born" : "gaussian"; }

inline ShotMode shot_mode_from_string(std::string_view s) {
  if (s == "born") return ShotMode::Born;
  if (s == "gaussian") return ShotMode::Gaussian;
  throw Error(ErrorCode::Parse, "unknown shot mode '" + std::string(s) + "' (expected born|gaussian)");
}

struct ShotEstimate {
  double mean = 0.0;
  std::int64_t n_shots = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::int64_t node_index = 0;
};

struct SamplingPlan {
  std::int64_t shots_per_node = 1;
  double epsilon = 0.0;
  double delta = 0.0;
  double gamma_l1 = 1.0;
};

/// Eigen-resolution of an observable with degenerate eigenvalues grouped;
/// reusable across many states.
class SpectralObservable {
 public:
  explicit SpectralObservable(const Observable& obs, const Tolerances& tol = kDefaultTolerances)
      : alpha_(obs.bound_alpha()), dim_(obs.dim()) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(obs.matrix()));
    detail::require(es.info() == Eigen::Success, ErrorCode::NumericalFailure,
                    "observable eigendecomposition failed");
    vectors_ = es.eigenvectors();
    const auto& ev = es.eigenvalues();
    Index start = 0;
    for (Index k = 1; k <= ev.size(); ++k) {
      if (k == ev.size() || ev(k) - ev(start) > tol.eig * std::max(1.0, alpha_)) {
        double mean = 0.0;
        for (Index q = start; q < k; ++q) mean += ev(q);
        values_.push_back(mean / static_cast<double>(k - start));
        ranges_.push_back({start, k});
        start = k;
      }
    }
  }

  const std::vector<double>& values() const { return values_; }
  double alpha() const { return alpha_; }
  double spread() const { return values_.back() - values_.front(); }

  /// p_k = Tr(rho P_k) / Tr(rho), validated against tol_psd then clipped and renormalized.
  std::vector<double> probabilities(const ComplexMatrix& rho, const Tolerances& tol = kDefaultTolerances) const {
    detail::require_same_dim(rho, dim_, "probabilities");
    const double tr = rho.trace().real();
    detail::require(tr > 0.0 && std::isfinite(tr), ErrorCode::InvalidState, "probabilities: non-positive trace");
    const ComplexMatrix rot = vectors_.adjoint() * rho * vectors_;
    std::vector<double> p(values_.size());
    double total = 0.0;
    for (std::size_t g = 0; g < values_.size(); ++g) {
      double s = 0.0;
      for (Index q = ranges_[g].first; q < ranges_[g].second; ++q) s += rot(q, q).real();
      s /= tr;
      detail::require(s >= -tol.psd && s <= 1.0 + tol.psd, ErrorCode::InvalidState,
                      "probabilities: outcome probability " + std::to_string(s) + " outside [0, 1]");
      p[g] = std::clamp(s, 0.0, 1.0);
      total += p[g];
    }
    detail::require(total > 0.0, ErrorCode::InvalidState, "probabilities: zero total mass");
    for (double& x : p) x /= total;
    return p;
  }

 private:
  double alpha_;
  Index dim_;
  ComplexMatrix vectors_;
  std::vector<double> values_;
  std::vector<std::pair<Index, Index>> ranges_;
};

/// Mean of n_shots projective measurements. Born mode draws the multinomial
/// outcome counts by sequential binomials; the Gaussian surrogate adds
/// N(0, spread^2 / (4 n)) to the exact value and clamps to the spectrum.
inline double sample_mean(const SpectralObservable& spec, const ComplexMatrix& rho, std::int64_t n_shots,
                          KeyedRng& rng, ShotMode mode = ShotMode::Born,
                          const Tolerances& tol = kDefaultTolerances) {
  detail::require(n_shots >= 1, ErrorCode::InvalidArgument, "sample_mean: n_shots must be >= 1");
  const std::vector<double> p = spec.probabilities(rho, tol);
  const auto& vals = spec.values();
  if (mode == ShotMode::Gaussian) {
    double exact = 0.0;
    for (std::size_t g = 0; g < p.size(); ++g) exact += p[g] * vals[g];
    std::normal_distribution<double> normal(0.0, spec.spread() / (2.0 * std::sqrt(static_cast<double>(n_shots))));
    return std::clamp(exact + normal(rng), vals.front(), vals.back());
  }
  std::int64_t remaining = n_shots;
  double mass = 1.0;
  double sum = 0.0;
  for (std::size_t g = 0; g < p.size() && remaining > 0; ++g) {
    std::int64_t c = remaining;
    if (g + 1 < p.size()) {
      const double q = mass > 0.0 ? std::clamp(p[g] / mass, 0.0, 1.0) : 1.0;
      std::binomial_distribution<std::int64_t> bin(remaining, q);
      c = bin(rng);
    }
    sum += static_cast<double>(c) * vals[g];
    remaining -= c;
    mass -= p[g];
  }
  return sum / static_cast<double>(n_shots);
}

/// Shot-noise estimate of Tr(rho O) from n_shots Born-rule draws.
inline ShotEstimate measure_shots(const DensityMatrix& rho, const Observable& obs, std::int64_t n_shots,
                                  std::uint64_t seed, std::int64_t node_index = 0, std::uint64_t trial = 0,
                                  ShotMode mode = ShotMode::Born, const Tolerances& tol = kDefaultTolerances) {
  detail::require_same_dim(rho.matrix(), obs.dim(), "measure_shots");
  const SpectralObservable spec(obs, tol);
  KeyedRng rng(seed, static_cast<std::uint64_t>(node_index), trial);
  return ShotEstimate{sample_mean(spec, rho.matrix(), n_shots, rng, mode, tol), n_shots, obs.bound_alpha(), seed,
                      node_index};
}

/// N_S = ceil(2 alpha^2 |gamma|_1^2 / eps^2 * ln(2 / delta)).
inline std::int64_t hoeffding_shots(double alpha, double gamma_l1, double epsilon, double delta) {
  detail::require(alpha > 0.0 && gamma_l1 > 0.0 && epsilon > 0.0 && delta > 0.0 && delta < 1.0,
                  ErrorCode::InvalidArgument, "hoeffding_shots: arguments must be positive with delta < 1");
  const double n = 2.0 * alpha * alpha * gamma_l1 * gamma_l1 / (epsilon * epsilon) * std::log(2.0 / delta);
  detail::require(n < 9.0e18, ErrorCode::InvalidArgument, "hoeffding_shots: shot count overflows");
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(n)));
}

inline SamplingPlan plan_shots(double alpha, double gamma_l1, double epsilon, double delta) {
  return SamplingPlan{hoeffding_shots(alpha, gamma_l1, epsilon, delta), epsilon, delta, gamma_l1};
}

namespace detail {

/// Runs body(j) for j in [0, n) on up to `jobs` threads; rethrows the first error.
template <class Body>
void parallel_for(std::size_t n, unsigned jobs, Body&& body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs <= 1) {
    for (std::size_t j = 0; j < n; ++j) body(j);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t j = next++; j < n; j = next++) {
        try {
          body(j);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline void require_quantized(const StepGrid& grid) {
  require(grid.quantized() && grid.total_time.has_value(), ErrorCode::InvalidArgument,
          "curve: grid must be quantized (integer step counts)");
}

}  // namespace detail

/// Trace-normalized final states K(tau_j)^{k_j} rho0 for each node of a quantized grid.
inline std::vector<ComplexMatrix> curve_states(const LindbladModel& model, const DensityMatrix& rho0,
                                               const StepGrid& grid, IntegratorKind kind, unsigned jobs = 1) {
  detail::require_quantized(grid);
  std::vector<ComplexMatrix> out(grid.size());
  EvolveOptions opt;
  opt.normalize_trace = true;
  detail::parallel_for(grid.size(), jobs, [&](std::size_t j) {
    const auto steps = static_cast<std::size_t>((*grid.step_counts)[j]);
    out[j] = evolve(model, rho0, *grid.total_time, steps, kind, opt).final_state();
  });
  return out;
}

/// Tr(O rho_j) for states from curve_states.
inline std::vector<double> noiseless_values(const std::vector<ComplexMatrix>& states, const Observable& obs) {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(expectation(s, obs));
  return out;
}

/// One shot-noise draw per node; node j uses the stream (seed, j, trial).
inline std::vector<ShotEstimate> sample_curve(const std::vector<ComplexMatrix>& states, const SpectralObservable& spec,
                                              std::int64_t n_shots, std::uint64_t seed, std::uint64_t trial = 0,
                                              ShotMode mode = ShotMode::Born,
                                              const Tolerances& tol = kDefaultTolerances) {
  std::vector<ShotEstimate> out;
  out.reserve(states.size());
  for (std::size_t j = 0; j < states.size(); ++j) {
    KeyedRng rng(seed, j, trial);
    out.push_back(ShotEstimate{sample_mean(spec, states[j], n_shots, rng, mode, tol), n_shots, spec.alpha(), seed,
                               static_cast<std::int64_t>(j)});
  }
  return out;
}

inline std::vector<ShotEstimate> noisy_curve(const LindbladModel& model, const DensityMatrix& rho0,
                                             const StepGrid& grid, const Observable& obs, IntegratorKind kind,
                                             std::int64_t n_shots, std::uint64_t seed, unsigned jobs = 1,
                                             ShotMode mode = ShotMode::Born) {
  detail::require_same_dim(obs.matrix(), model.dim(), "noisy_curve observable");
  const auto states = curve_states(model, rho0, grid, kind, jobs);
  return sample_curve(states, SpectralObservable(obs), n_shots, seed, 0, mode);
}

inline std::vector<double> means(const std::vector<ShotEstimate>& est) {
  std::vector<double> out;
  out.reserve(est.size());
  for (const auto& e : est) out.push_back(e.mean);
  return out;
}

/// CSV columns node_index,tau,step_count,n_shots,mean,seed.
inline void write_curve_csv(std::ostream& os, const StepGrid& grid, const std::vector<ShotEstimate>& est) {
  detail::require(est.size() == grid.size(), ErrorCode::DimensionMismatch, "write_curve_csv: size mismatch");
  const auto old_prec = os.precision(17);
  os << "node_index,tau,step_count,n_shots,mean,seed\n";
  for (std::size_t j = 0; j < est.size(); ++j) {
    os << est[j].node_index << ',' << grid.nodes[j] << ',';
    if (grid.step_counts) os << (*grid.step_counts)[j];
    os << ',' << est[j].n_shots << ',' << est[j].mean << ',' << est[j].seed << '\n';
  }
  os.precision(old_prec);
}

}  // namespace lindblad
