#pragma once

#include "lindblad/extrapolation.hpp"
#include "lindblad/integrators.hpp"
#include "lindblad/sampling.hpp"

#include <json.hpp>

#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace lindblad {

enum class SequenceVariant { Kraus, Dilated };

inline std::string_view to_string(SequenceVariant v) { return v == SequenceVariant::Kraus ? "kraus" : "dilated"; }

/// Table c_{i,j,k} (j <= k) of the error-expansion generating sequence.
/// Level k is filled for i <= i_max + (k_max - k) + 1, since level k reads
/// level k - p at rows i + p and p + 1.
class GeneratingSequence {
 public:
  GeneratingSequence(SequenceVariant variant, double l, double aux, int i_max, int k_max)
      : variant_(variant), l_(l), aux_(aux), i_max_(i_max), k_max_(k_max) {
    rows_ = i_max + k_max + 2;
    data_.assign(static_cast<std::size_t>(rows_ * (k_max + 1) * (k_max + 1)), 0.0);
  }

  SequenceVariant variant() const { return variant_; }
  double l() const { return l_; }
  /// B for the Kraus variant, J (jump count) for the dilated variant.
  double aux() const { return aux_; }
  int i_max() const { return i_max_; }
  int k_max() const { return k_max_; }
  /// Largest i stored at level k.
  int rows_at(int k) const { return i_max_ + k_max_ - k + 1; }

  double operator()(int i, int j, int k) const { return data_[offset(i, j, k)]; }
  double& at(int i, int j, int k) { return data_[offset(i, j, k)]; }

 private:
  std::size_t offset(int i, int j, int k) const {
    return static_cast<std::size_t>((k * (k_max_ + 1) + j) * rows_ + i);
  }

  SequenceVariant variant_;
  double l_;
  double aux_;
  int i_max_;
  int k_max_;
  int rows_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline std::vector<double> factorials(int n) {
  std::vector<double> f(static_cast<std::size_t>(n + 1), 1.0);
  for (int k = 1; k <= n; ++k) f[static_cast<std::size_t>(k)] = f[static_cast<std::size_t>(k - 1)] * k;
  return f;
}

}  // namespace detail

/// Dynamic program over increasing k; within level k, i = 0 first (it reads
/// only lower levels), then increasing i.
inline GeneratingSequence build_sequence(SequenceVariant variant, double l, double aux, int i_max, int k_max) {
  detail::require(l >= 1.0, ErrorCode::Unsupported, "build_sequence: l < 1 is outside the supported regime");
  detail::require(i_max >= 0 && k_max >= 0, ErrorCode::InvalidArgument, "build_sequence: negative table size");
  detail::require(aux >= 0.0 && std::isfinite(aux), ErrorCode::InvalidArgument, "build_sequence: bad auxiliary");
  GeneratingSequence s(variant, l, aux, i_max, k_max);
  const auto fact = detail::factorials(2 * (i_max + k_max) + 2);
  const double big_b = aux;
  const double jp1 = aux + 1.0;

  for (int i = 0; i <= s.rows_at(0); ++i) s.at(i, 0, 0) = std::pow(l, i);
  for (int k = 1; k <= k_max; ++k) {
    const int top = s.rows_at(k);
    const double kp1f = fact[static_cast<std::size_t>(k + 1)];
    for (int j = 1; j <= k; ++j) {
      double c = (j == 1) ? std::pow(l, k + 1) / kp1f : 0.0;
      if (variant == SequenceVariant::Kraus) c += big_b / j * s(0, j - 1, k - 1);
      for (int p = 1; p <= k - j; ++p) {
        const double pf = fact[static_cast<std::size_t>(p + 1)];
        if (variant == SequenceVariant::Dilated) c += jp1 * std::pow(l, p + 1) / (j * pf) * s(0, j - 1, k - p);
        c += s(p + 1, j - 1, k - p) / (j * pf);
      }
      s.at(0, j, k) = c;
    }
    for (int i = 1; i <= top; ++i) {
      for (int j = 0; j < k; ++j) {
        double c = l * s(i - 1, j, k);
        if (j == 0) c += std::pow(l, i + k) / kp1f;
        if (variant == SequenceVariant::Kraus) c += big_b * s(i - 1, j, k - 1);
        for (int p = 1; p <= k - j; ++p) {
          const double pf = fact[static_cast<std::size_t>(p + 1)];
          if (variant == SequenceVariant::Dilated) c += jp1 * std::pow(l, p + 1) / pf * s(i - 1, j, k - p);
          c += s(i + p, j, k - p) / pf;
        }
        s.at(i, j, k) = c;
      }
      s.at(i, k, k) = l * s(i - 1, k, k);
    }
    for (int i = 0; i <= top; ++i)
      for (int j = 0; j <= k; ++j)
        detail::require(std::isfinite(s(i, j, k)), ErrorCode::NumericalFailure, "build_sequence: table overflow");
  }
  return s;
}

struct BoundReport {
  double c1 = 0.0;
  double c2 = 0.0;
  double max_ratio = 0.0;
  int worst_i = 0, worst_j = 0, worst_k = 0;
  bool pass = false;
};

/// max over i <= i_max, j <= k <= k_max of c_{i,j,k} j! / (c1^{i+k} c2^k).
inline BoundReport verify_bound(const GeneratingSequence& seq, double c1, double c2) {
  detail::require(c1 > 0.0 && c2 > 0.0, ErrorCode::InvalidArgument, "verify_bound: constants must be positive");
  const auto fact = detail::factorials(seq.k_max());
  BoundReport r;
  r.c1 = c1;
  r.c2 = c2;
  for (int k = 0; k <= seq.k_max(); ++k)
    for (int j = 0; j <= k; ++j)
      for (int i = 0; i <= seq.i_max(); ++i) {
        // Ratio in log space: c1^{i+k} c2^k overflows long before the table does.
        const double c = seq(i, j, k);
        if (c == 0.0) continue;
        const double log_ratio = std::log(c) + std::log(fact[static_cast<std::size_t>(j)]) -
                                 (i + k) * std::log(c1) - k * std::log(c2);
        const double ratio = std::exp(log_ratio);
        if (ratio > r.max_ratio) {
          r.max_ratio = ratio;
          r.worst_i = i;
          r.worst_j = j;
          r.worst_k = k;
        }
      }
  r.pass = r.max_ratio <= 1.0 + 1e-12;
  return r;
}

/// C1 = max{B, l(e+1), 1} (Kraus) or max{l(J+1), l(e+1), 1} (dilated);
/// C2 = (e+1) max(ln C1, C1).
inline std::pair<double, double> sequence_constants(SequenceVariant variant, double l, double aux) {
  constexpr double e = std::numbers::e;
  const double first = variant == SequenceVariant::Kraus ? aux : l * (aux + 1.0);
  const double c1 = std::max({first, l * (e + 1.0), 1.0});
  const double c2 = (e + 1.0) * std::max(std::log(c1), c1);
  return {c1, c2};
}

struct GevreyConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double sigma = 0.0;
  double nu = 0.0;
  double tau_max = 0.0;
};

/// sigma = 2e |O|, nu = 2 C1 C2 max(T^2 max(ln T, 1), 1), tau_max = 1 / (2 nu).
inline GevreyConstants gevrey_constants(SequenceVariant variant, double l, double aux, double obs_norm, double T) {
  detail::require(l > 1.0, ErrorCode::Unsupported, "gevrey_constants: requires l > 1");
  detail::require(obs_norm >= 0.0 && T > 0.0, ErrorCode::InvalidArgument, "gevrey_constants: bad arguments");
  GevreyConstants g;
  std::tie(g.c1, g.c2) = sequence_constants(variant, l, aux);
  g.sigma = 2.0 * std::numbers::e * obs_norm;
  g.nu = 2.0 * g.c1 * g.c2 * std::max(T * T * std::max(std::log(T), 1.0), 1.0);
  g.tau_max = 1.0 / (2.0 * g.nu);
  return g;
}

inline GevreyConstants gevrey_constants(double l, double big_b, double obs_norm, double T) {
  return gevrey_constants(SequenceVariant::Kraus, l, big_b, obs_norm, T);
}

struct M2Report {
  double bound = 0.0;
  /// max over sampled states and tau of |K(tau) rho - rho - tau L rho|_1 / tau^2.
  double empirical = 0.0;
  bool pass = false;
};

/// B = (|H| + (1/2) Sum_j |L_j|^2)^2.
inline double m2_bound_value(const LindbladModel& model) {
  double s = spectral_norm(model.hamiltonian());
  for (const auto& l : model.jumps()) {
    const double n = spectral_norm(l);
    s += 0.5 * n * n;
  }
  return s * s;
}

/// The bound B plus a numerical check of the second-order Kraus remainder
/// over random pure states at tau in {1e-2, 1e-3}.
inline M2Report m2_bound(const LindbladModel& model, std::uint64_t seed = 7, int n_states = 8) {
  M2Report r;
  r.bound = m2_bound_value(model);
  const Index d = model.dim();
  KeyedRng rng(seed);
  std::normal_distribution<double> normal;
  for (int s = 0; s < n_states; ++s) {
    ComplexVector psi(d);
    for (Index q = 0; q < d; ++q) psi(q) = Complex(normal(rng), normal(rng));
    const ComplexMatrix rho = DensityMatrix::pure(psi).matrix();
    const ComplexMatrix lr = lindblad_apply(model, rho);
    for (double tau : {1e-2, 1e-3}) {
      const ComplexMatrix rem = kraus_step(model, rho, tau) - rho - tau * lr;
      r.empirical = std::max(r.empirical, trace_norm(rem) / (tau * tau));
    }
  }
  r.pass = r.empirical <= r.bound * (1.0 + 1e-9) + 1e-12;
  return r;
}

struct DilationExpansion {
  /// rho_R^{(2k)} = tr_A rho^{(2k)}, k = 0..k_max.
  std::vector<ComplexMatrix> coefficients;
  /// Lambda = 2 Lambda_0 + 2 Lambda_1^2 with Lambda_0 = 2|H_S|, Lambda_1 = max_j |L_j|.
  double lambda = 0.0;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  /// Largest entry of any odd-order partial trace.
  double odd_max = 0.0;
  /// |rho_R^{(2)} - L rho|, max entry.
  double generator_residual = 0.0;
};

inline DilationExpansion dilation_expansion(const LindbladModel& model, const DensityMatrix& rho, int k_max) {
  detail::require(k_max >= 1, ErrorCode::InvalidArgument, "dilation_expansion: k_max must be >= 1");
  const Index d = model.dim();
  const Index na = static_cast<Index>(model.jump_count()) + 1;
  const auto series = dilation_series(model, rho.matrix(), 2 * k_max + 1);
  DilationExpansion out;
  for (int k = 0; k <= 2 * k_max + 1; ++k) {
    const ComplexMatrix red = partial_trace_ancilla(series[static_cast<std::size_t>(k)], na, d);
    if (k % 2 == 0)
      out.coefficients.push_back(red);
    else
      out.odd_max = std::max(out.odd_max, red.cwiseAbs().maxCoeff());
  }
  out.lambda0 = 2.0 * spectral_norm(model.hamiltonian());
  for (const auto& l : model.jumps()) out.lambda1 = std::max(out.lambda1, spectral_norm(l));
  out.lambda = 2.0 * out.lambda0 + 2.0 * out.lambda1 * out.lambda1;
  out.generator_residual = (out.coefficients[1] - lindblad_apply(model, rho.matrix())).cwiseAbs().maxCoeff();

  detail::require((out.coefficients[0] - rho.matrix()).cwiseAbs().maxCoeff() == 0.0, ErrorCode::NumericalFailure,
                  "dilation_expansion: zeroth coefficient differs from rho");
  detail::require(out.generator_residual <= 1e-10, ErrorCode::NumericalFailure,
                  "dilation_expansion: second coefficient differs from L rho");
  detail::require(out.odd_max <= 1e-12, ErrorCode::NumericalFailure,
                  "dilation_expansion: odd-order partial trace does not vanish");
  return out;
}

struct ResourceReport {
  double epsilon = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  /// Polynomial degree n; the grid carries n + 1 nodes.
  int n_nodes = 0;
  double tau_max = 0.0;
  double tau_max_effective = 0.0;
  double d_max = 0.0;
  double gamma_l1 = 0.0;
  std::int64_t shots = 0;
  double t_lhs = 0.0;
  double t_rhs = 0.0;
};

/// Formula evaluations only; logarithms are natural.
///   n = ceil(ln(sigma / eps) / (3 ln 2) - 2/3), sigma = 2e |O|
///   tau_max = 1 / (l^2 max(ln l, 1)), d_max = T^2 n^2 / tau_max
///   N_S from the measured Chebyshev |gamma|_1
///   T >= ln(1/eps) sqrt(ln ln(1/eps)) / (l sqrt(ln l)), both sides reported
inline ResourceReport resource_estimates(double l, double T, double epsilon, double delta, double obs_norm) {
  detail::require(l > 1.0, ErrorCode::Unsupported, "resource_estimates: requires l > 1");
  detail::require(T > 0.0 && epsilon > 0.0 && epsilon < 1.0 && delta > 0.0 && delta < 1.0 && obs_norm > 0.0,
                  ErrorCode::InvalidArgument, "resource_estimates: bad arguments");
  ResourceReport r;
  r.epsilon = epsilon;
  r.delta = delta;
  r.sigma = 2.0 * std::numbers::e * obs_norm;
  const double raw = std::log(r.sigma / epsilon) / (3.0 * std::numbers::ln2) - 2.0 / 3.0;
  r.n_nodes = std::max(1, static_cast<int>(std::ceil(raw)));
  r.tau_max = 1.0 / (l * l * std::max(std::log(l), 1.0));
  r.tau_max_effective = recommended_interval(l, T);
  r.d_max = T * T * r.n_nodes * r.n_nodes / r.tau_max;
  r.gamma_l1 = lebesgue_at_zero(chebyshev_grid(r.tau_max_effective, r.n_nodes), ExtrapolationMethod::Interpolation);
  r.shots = hoeffding_shots(obs_norm, r.gamma_l1, epsilon, delta);
  const double li = std::log(1.0 / epsilon);
  r.t_lhs = T;
  r.t_rhs = li * std::sqrt(std::max(std::log(li), 0.0)) / (l * std::sqrt(std::log(l)));
  return r;
}

inline nlohmann::json to_json(const BoundReport& r) {
  return {{"c1", r.c1},           {"c2", r.c2},           {"max_ratio", r.max_ratio}, {"worst_i", r.worst_i},
          {"worst_j", r.worst_j}, {"worst_k", r.worst_k}, {"pass", r.pass}};
}

inline nlohmann::json to_json(const GevreyConstants& g) {
  return {{"c1", g.c1}, {"c2", g.c2}, {"sigma", g.sigma}, {"nu", g.nu}, {"tau_max", g.tau_max}, {"log_base", "e"}};
}

inline nlohmann::json to_json(const ResourceReport& r) {
  return {{"epsilon", r.epsilon},
          {"delta", r.delta},
          {"sigma", r.sigma},
          {"n_nodes", r.n_nodes},
          {"tau_max", r.tau_max},
          {"tau_max_effective", r.tau_max_effective},
          {"d_max", r.d_max},
          {"gamma_l1", r.gamma_l1},
          {"shots", r.shots},
          {"t_threshold", {{"lhs", r.t_lhs}, {"rhs", r.t_rhs}, {"holds", r.t_lhs >= r.t_rhs}}},
          {"log_base", "e"}};
}

}  // namespace lindblad
