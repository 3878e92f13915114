#pragma once

#include "lindblad/grids.hpp"

#include <json.hpp>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace lindblad {

enum class ExtrapolationMethod { Interpolation, Regression };

inline std::string_view to_string(ExtrapolationMethod m) {
  return m == ExtrapolationMethod::Interpolation ? "interpolation" : "regression";
}

inline ExtrapolationMethod extrapolation_method_from_string(std::string_view s) {
  if (s == "interpolation" || s == "richardson") return ExtrapolationMethod::Interpolation;
  if (s == "regression") return ExtrapolationMethod::Regression;
  throw Error(ErrorCode::InvalidArgument, "unknown extrapolation method '" + std::string(s) + "'");
}

/// Linear functional values -> p(0), where p is the interpolating (or
/// least-squares) polynomial through (tau_j, value_j).
struct ExtrapolationWeights {
  std::vector<double> gammas;
  StepGrid grid;
  ExtrapolationMethod method = ExtrapolationMethod::Interpolation;
  int degree = 0;
  double gamma_l1 = 0.0;
};

struct ExtrapolationResult {
  double value_at_zero = 0.0;
  ExtrapolationWeights weights;
  /// RMS fit residual; regression only.
  std::optional<double> residual;
  /// Fitted polynomial coefficients in ascending powers of tau.
  std::vector<double> coefficients;
};

/// Condition-number ceiling for the scaled least-squares design matrix.
inline constexpr double kRegressionConditionLimit = 1e12;

namespace detail {

inline void require_distinct_nodes(const std::vector<double>& nodes) {
  require(!nodes.empty(), ErrorCode::InvalidArgument, "extrapolation: empty grid");
  for (double t : nodes)
    require(std::isfinite(t), ErrorCode::InvalidArgument, "extrapolation: non-finite node");
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b) {
      const double scale = std::max(std::abs(nodes[a]), std::abs(nodes[b]));
      require(std::abs(nodes[a] - nodes[b]) > 1e-14 * scale, ErrorCode::InvalidArgument,
              "extrapolation: duplicate nodes at indices " + std::to_string(a) + " and " + std::to_string(b));
    }
}

inline double l1(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

inline double node_scale(const std::vector<double>& nodes) {
  double s = 0.0;
  for (double t : nodes) s = std::max(s, std::abs(t));
  return s > 0.0 ? s : 1.0;
}

// Columns (tau / s)^k, k = 0..degree.
inline Eigen::MatrixXd scaled_vandermonde(const std::vector<double>& nodes, int degree, double s) {
  const Index n = static_cast<Index>(nodes.size());
  Eigen::MatrixXd v(n, degree + 1);
  for (Index r = 0; r < n; ++r) {
    double p = 1.0;
    const double x = nodes[static_cast<std::size_t>(r)] / s;
    for (int c = 0; c <= degree; ++c) {
      v(r, c) = p;
      p *= x;
    }
  }
  return v;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

// Least-squares polynomial coefficients (ascending, unscaled tau) via QR.
inline std::vector<double> fit_coefficients(const std::vector<double>& nodes, const std::vector<double>& values,
                                            int degree) {
  const double s = node_scale(nodes);
  const Eigen::MatrixXd v = scaled_vandermonde(nodes, degree, s);
  const Eigen::VectorXd c = v.colPivHouseholderQr().solve(to_eigen(values));
  std::vector<double> out(static_cast<std::size_t>(degree + 1));
  double sp = 1.0;
  for (int k = 0; k <= degree; ++k) {
    out[static_cast<std::size_t>(k)] = c(k) / sp;
    sp *= s;
  }
  return out;
}

}  // namespace detail

/// gamma_j = prod_{k != j} tau_k / (tau_k - tau_j): the Lagrange basis at zero.
inline ExtrapolationWeights richardson_weights(const StepGrid& grid) {
  const auto& t = grid.nodes;
  detail::require_distinct_nodes(t);
  ExtrapolationWeights w;
  w.grid = grid;
  w.method = ExtrapolationMethod::Interpolation;
  w.degree = static_cast<int>(t.size()) - 1;
  w.gammas.resize(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    double g = 1.0;
    for (std::size_t k = 0; k < t.size(); ++k)
      if (k != j) g *= t[k] / (t[k] - t[j]);
    w.gammas[j] = g;
  }
  w.gamma_l1 = detail::l1(w.gammas);
  return w;
}

/// Weights of "least-squares degree-m fit, evaluated at tau = 0". With the
/// thin QR of the scaled Vandermonde V = QR, p(0) = e0^T R^{-1} Q^T y, so
/// gamma = Q R^{-T} e0.
inline ExtrapolationWeights regression_weights(const StepGrid& grid, int degree) {
  const auto& t = grid.nodes;
  detail::require_distinct_nodes(t);
  const int n_nodes = static_cast<int>(t.size());
  detail::require(degree >= 0, ErrorCode::InvalidArgument, "regression_weights: degree must be >= 0");
  detail::require(degree < n_nodes - 1, ErrorCode::InvalidArgument,
                  "regression_weights: degree must be below node_count - 1 (use richardson_weights)");

  const Eigen::MatrixXd v = detail::scaled_vandermonde(t, degree, detail::node_scale(t));
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  detail::require(cond <= kRegressionConditionLimit, ErrorCode::NumericalFailure,
                  "regression_weights: design matrix condition number " + std::to_string(cond) +
                      " exceeds limit");

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
  const Index m = degree + 1;
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(m);
  e0(0) = 1.0;
  const Eigen::VectorXd wv = r.transpose().triangularView<Eigen::Lower>().solve(e0);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(v.rows(), m);
  const Eigen::VectorXd g = q * wv;

  ExtrapolationWeights w;
  w.grid = grid;
  w.method = ExtrapolationMethod::Regression;
  w.degree = degree;
  w.gammas.assign(g.data(), g.data() + g.size());
  w.gamma_l1 = detail::l1(w.gammas);
  return w;
}

inline ExtrapolationWeights make_weights(const StepGrid& grid, ExtrapolationMethod method, int degree = -1) {
  if (method == ExtrapolationMethod::Interpolation) return richardson_weights(grid);
  return regression_weights(grid, degree);
}

inline ExtrapolationResult extrapolate(const ExtrapolationWeights& weights, const std::vector<double>& values) {
  detail::require(values.size() == weights.gammas.size(), ErrorCode::DimensionMismatch,
                  "extrapolate: " + std::to_string(values.size()) + " values for " +
                      std::to_string(weights.gammas.size()) + " weights");
  ExtrapolationResult res;
  res.weights = weights;
  for (std::size_t j = 0; j < values.size(); ++j) res.value_at_zero += weights.gammas[j] * values[j];
  res.coefficients = detail::fit_coefficients(weights.grid.nodes, values, weights.degree);
  if (weights.method == ExtrapolationMethod::Regression) {
    double ss = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      double p = 0.0;
      for (std::size_t k = res.coefficients.size(); k-- > 0;) p = p * weights.grid.nodes[j] + res.coefficients[k];
      ss += (p - values[j]) * (p - values[j]);
    }
    res.residual = std::sqrt(ss / static_cast<double>(values.size()));
  }
  return res;
}

/// Sum_j |gamma_j| for the chosen method.
inline double lebesgue_at_zero(const StepGrid& grid, ExtrapolationMethod method, int degree = -1) {
  return make_weights(grid, method, degree).gamma_l1;
}

inline nlohmann::json result_to_json(const ExtrapolationResult& r) {
  nlohmann::json j;
  j["value_at_zero"] = r.value_at_zero;
  j["gammas"] = r.weights.gammas;
  j["gamma_l1"] = r.weights.gamma_l1;
  j["method"] = std::string(to_string(r.weights.method));
  j["degree"] = r.weights.degree;
  j["residual"] = r.residual ? nlohmann::json(*r.residual) : nlohmann::json(nullptr);
  j["coefficients"] = r.coefficients;
  j["nodes"] = r.weights.grid.nodes;
  return j;
}

}  // namespace lindblad
