#pragma once

#include "lindblad/models_zoo.hpp"
#include "lindblad/reference.hpp"
#include "lindblad/theory.hpp"

#include <json.hpp>

#include <optional>
#include <vector>

namespace lindblad {

struct VerifyOutcome {
  bool pass = true;
  nlohmann::json report = nlohmann::json::object();
};

/// Bound c_{i,j,k} <= C1^{i+k} C2^k / j! for both variants over l in `ls`,
/// Kraus with B in {l^2/4, l^2/16}, dilated with J in {1, 4}.
inline VerifyOutcome verify_sequences(const std::vector<double>& ls, int i_max = 12, int k_max = 12) {
  VerifyOutcome out;
  out.report["cases"] = nlohmann::json::array();
  for (double l : ls) {
    auto run = [&](SequenceVariant v, double aux) {
      const auto seq = build_sequence(v, l, aux, i_max, k_max);
      const auto [c1, c2] = sequence_constants(v, l, aux);
      const BoundReport r = verify_bound(seq, c1, c2);
      nlohmann::json j = to_json(r);
      j["variant"] = std::string(to_string(v));
      j["l"] = l;
      j[v == SequenceVariant::Kraus ? "B" : "J"] = aux;
      j["margin"] = 1.0 - r.max_ratio;
      out.report["cases"].push_back(j);
      out.pass = out.pass && r.pass;
    };
    for (double b : {l * l / 4.0, l * l / 16.0}) run(SequenceVariant::Kraus, b);
    for (double jj : {1.0, 4.0}) run(SequenceVariant::Dilated, jj);
  }
  out.report["i_max"] = i_max;
  out.report["k_max"] = k_max;
  out.report["pass"] = out.pass;
  return out;
}

struct GevreyCheck {
  GevreyConstants constants;
  /// |f^{(k)}(tau_max / 2)|, k = 1..3.
  std::vector<double> derivatives;
  std::vector<double> envelope;
  bool pass = false;
};

/// Finite-difference derivatives of f(tau) = Tr(O rho_tau(T)) at tau_max / 2,
/// from a least-squares degree-6 fit over integer step counts N with
/// T / N in [tau_max / 4, 3 tau_max / 4].
inline GevreyCheck check_gevrey_envelope(const ModelBundle& b, IntegratorKind kind, double T, int samples = 41) {
  const double l = generator_bound(b.model);
  const SequenceVariant v = kind == IntegratorKind::KrausFirstOrder ? SequenceVariant::Kraus : SequenceVariant::Dilated;
  const double aux = kind == IntegratorKind::KrausFirstOrder ? m2_bound_value(b.model)
                                                             : static_cast<double>(b.model.jump_count());
  GevreyCheck g;
  g.constants = gevrey_constants(v, l, aux, b.observable.bound_alpha(), T);
  const double tm = g.constants.tau_max;
  const double n_lo = std::ceil(T / (0.75 * tm));
  const double n_hi = std::floor(T / (0.25 * tm));
  std::vector<std::size_t> steps;
  for (int s = 0; s < samples; ++s) {
    const auto n = static_cast<std::size_t>(std::llround(n_lo + (n_hi - n_lo) * s / (samples - 1)));
    if (steps.empty() || steps.back() != n) steps.push_back(n);
  }
  const double center = 0.5 * tm;
  const double h = 0.25 * tm;
  constexpr int kDeg = 6;
  Eigen::MatrixXd v_mat(static_cast<Index>(steps.size()), kDeg + 1);
  Eigen::VectorXd y(static_cast<Index>(steps.size()));
  for (std::size_t r = 0; r < steps.size(); ++r) {
    const double tau = T / static_cast<double>(steps[r]);
    const double x = (tau - center) / h;
    double p = 1.0;
    for (int c = 0; c <= kDeg; ++c, p *= x) v_mat(static_cast<Index>(r), c) = p;
    y(static_cast<Index>(r)) =
        expectation(evolve(b.model, b.initial_state, T, steps[r], kind).final_state(), b.observable);
  }
  const Eigen::VectorXd c = v_mat.colPivHouseholderQr().solve(y);
  g.pass = true;
  double kf = 1.0;
  for (int k = 1; k <= 3; ++k) {
    kf *= k;
    const double d = std::abs(kf * c(k) / std::pow(h, k));
    const double env = g.constants.sigma * std::pow(g.constants.nu, k) * kf;
    g.derivatives.push_back(d);
    g.envelope.push_back(env);
    g.pass = g.pass && d <= env;
  }
  return g;
}

inline VerifyOutcome verify_gevrey(std::uint64_t seed = 4) {
  VerifyOutcome out;
  const auto b = random_model(4, 1, seed);
  const GevreyCheck g = check_gevrey_envelope(b, IntegratorKind::KrausFirstOrder, 1.0);
  out.pass = g.pass;
  out.report = {{"constants", to_json(g.constants)},
                {"derivatives", g.derivatives},
                {"envelope", g.envelope},
                {"model", "random dim 4, seed " + std::to_string(seed)},
                {"pass", g.pass}};
  const M2Report m2 = m2_bound(b.model);
  out.report["m2"] = {{"bound", m2.bound}, {"empirical", m2.empirical}, {"pass", m2.pass}};
  out.pass = out.pass && m2.pass;
  out.report["pass"] = out.pass;
  return out;
}

struct DilationCheck {
  double zeroth_defect = 0.0;
  double generator_residual = 0.0;
  double odd_max = 0.0;
  /// max_k |rho_R^{(2k)}|_1 k! / ((J+1) Lambda^k).
  double norm_ratio = 0.0;
  /// max over tau, K of truncation error / (2 (J+1) (l tau)^{K+1} / (K+1)!).
  double truncation_ratio = 0.0;
  bool pass = false;
};

inline DilationCheck check_dilation(const ModelBundle& b, int k_max = 6) {
  DilationCheck c;
  const DilationExpansion e = dilation_expansion(b.model, b.initial_state, k_max);
  c.zeroth_defect = (e.coefficients[0] - b.initial_state.matrix()).cwiseAbs().maxCoeff();
  c.generator_residual = e.generator_residual;
  c.odd_max = e.odd_max;
  const double jp1 = static_cast<double>(b.model.jump_count()) + 1.0;
  double kf = 1.0;
  for (int k = 0; k <= k_max; ++k) {
    if (k) kf *= k;
    c.norm_ratio = std::max(c.norm_ratio, trace_norm(e.coefficients[static_cast<std::size_t>(k)]) * kf /
                                              (jp1 * std::pow(e.lambda, k)));
  }
  const double l = generator_bound(b.model);
  for (double lt : {0.5, 0.25, 0.1}) {
    const double tau = lt / l;
    const ComplexMatrix exact = dilated_step(b.model, b.initial_state.matrix(), tau);
    ComplexMatrix partial = ComplexMatrix::Zero(exact.rows(), exact.cols());
    double tp = 1.0, kf1 = 1.0;
    for (int K = 0; K <= std::min(5, k_max); ++K) {
      partial += tp * e.coefficients[static_cast<std::size_t>(K)];
      tp *= tau;
      kf1 *= K + 1;
      const double bound = 2.0 * jp1 * std::pow(lt, K + 1) / kf1;
      c.truncation_ratio = std::max(c.truncation_ratio, trace_norm(exact - partial) / bound);
    }
  }
  c.pass = c.zeroth_defect == 0.0 && c.generator_residual <= 1e-10 && c.odd_max <= 1e-12 && c.norm_ratio <= 1.0 &&
           c.truncation_ratio <= 1.0;
  return c;
}

inline nlohmann::json to_json(const DilationCheck& c) {
  return {{"zeroth_defect", c.zeroth_defect}, {"generator_residual", c.generator_residual},
          {"odd_max", c.odd_max},             {"norm_ratio", c.norm_ratio},
          {"truncation_ratio", c.truncation_ratio}, {"pass", c.pass}};
}

inline VerifyOutcome verify_dilation() {
  VerifyOutcome out;
  TfimParams p;
  p.n_q = 2;
  const DilationCheck t = check_dilation(build_tfim(p));
  out.report["tfim_nq2"] = to_json(t);
  out.pass = t.pass;
  out.report["random4"] = nlohmann::json::array();
  for (std::uint64_t seed : {11, 12, 13}) {
    const DilationCheck r = check_dilation(random_model(4, 2, seed));
    out.report["random4"].push_back(to_json(r));
    out.pass = out.pass && r.pass;
  }
  out.report["pass"] = out.pass;
  return out;
}

struct NodeCheck {
  int configurations = 0;
  int failures = 0;
  std::optional<nlohmann::json> first_failure;
};

/// Random (n, interval_hi, T) with T > pi^2 interval_hi n^2: quantized Chebyshev
/// nodes must be strictly increasing with distinct, decreasing step counts,
/// and quantization must be idempotent.
inline NodeCheck check_quantized_nodes(int count, std::uint64_t seed) {
  NodeCheck c;
  KeyedRng rng(seed, 0x9e7d, 0);
  for (int t = 0; t < count; ++t) {
    const int n = 2 + static_cast<int>(rng() % 63);
    const double hi = std::pow(10.0, -4.0 + 4.0 * rng.uniform());
    const double total = quantization_threshold(hi, static_cast<std::size_t>(n + 1)) * (1.0 + 1e-6 + 9.0 * rng.uniform());
    ++c.configurations;
    bool ok = true;
    try {
      const StepGrid q = quantize_grid(chebyshev_grid(hi, n), total);
      const auto& k = *q.step_counts;
      for (std::size_t j = 1; j < q.size(); ++j) ok = ok && q.nodes[j] > q.nodes[j - 1] && k[j] < k[j - 1];
      for (std::size_t j = 0; j < q.size(); ++j) ok = ok && q.nodes[j] <= chebyshev_grid(hi, n).nodes[j] * (1.0 + 1e-12);
      ok = ok && !q.precondition_warning;
      const StepGrid qq = quantize_grid(q, total);
      ok = ok && *qq.step_counts == k;
    } catch (const Error&) {
      ok = false;
    }
    if (!ok) {
      ++c.failures;
      if (!c.first_failure) c.first_failure = nlohmann::json{{"n", n}, {"interval_hi", hi}, {"total_time", total}};
    }
  }
  return c;
}

inline VerifyOutcome verify_nodes(int count = 1000, std::uint64_t seed = 2024) {
  VerifyOutcome out;
  const NodeCheck c = check_quantized_nodes(count, seed);
  out.pass = c.failures == 0;
  out.report = {{"configurations", c.configurations},
                {"failures", c.failures},
                {"first_failure", c.first_failure ? *c.first_failure : nlohmann::json(nullptr)}};
  // Chebyshev minimal spacing relative to interval_hi / (2 (n + 1)^2).
  double min_scaled = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 128; ++n) {
    const StepGrid g = chebyshev_grid(1.0, n);
    for (std::size_t j = 1; j < g.size(); ++j)
      min_scaled = std::min(min_scaled, (g.nodes[j] - g.nodes[j - 1]) * 2.0 * (n + 1) * (n + 1));
  }
  out.report["chebyshev_min_spacing_constant"] = min_scaled;
  out.pass = out.pass && min_scaled > 0.0;
  out.report["pass"] = out.pass;
  return out;
}

}  // namespace lindblad
