#pragma once

#include "lindblad/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace lindblad {

/// Ordered step sizes. When quantized, step_counts[j] * nodes[j] == total_time
/// and the counts are strictly decreasing.
struct StepGrid {
  std::vector<double> nodes;
  std::optional<std::vector<std::int64_t>> step_counts;
  double interval_hi = 0.0;
  std::optional<double> total_time;
  /// Set when quantization succeeded without its distinctness guarantee.
  bool precondition_warning = false;

  std::size_t size() const { return nodes.size(); }
  bool quantized() const { return step_counts.has_value(); }
  /// Polynomial degree of full interpolation (node count minus one).
  int degree() const { return static_cast<int>(nodes.size()) - 1; }
};

namespace detail {

inline void require_grid_args(double interval_hi, int n) {
  require(n >= 1, ErrorCode::InvalidArgument, "grid: n must be >= 1");
  require(interval_hi > 0.0 && std::isfinite(interval_hi), ErrorCode::InvalidArgument,
          "grid: interval_hi must be positive");
}

}  // namespace detail

/// tau_j = j * interval_hi / (n + 1), j = 1..n+1.
inline StepGrid equidistant_grid(double interval_hi, int n) {
  detail::require_grid_args(interval_hi, n);
  StepGrid g;
  g.interval_hi = interval_hi;
  const double h = interval_hi / (n + 1);
  for (int j = 1; j <= n + 1; ++j) g.nodes.push_back(j == n + 1 ? interval_hi : j * h);
  return g;
}

/// First-kind Chebyshev nodes mapped to (0, interval_hi):
/// tau_k = (interval_hi / 2)(1 - cos theta_k), theta_k = (2k - 1) pi / (2(n + 1)).
inline StepGrid chebyshev_grid(double interval_hi, int n) {
  detail::require_grid_args(interval_hi, n);
  StepGrid g;
  g.interval_hi = interval_hi;
  for (int k = 1; k <= n + 1; ++k) {
    const double theta = (2.0 * k - 1.0) * std::numbers::pi / (2.0 * (n + 1));
    // 1 - cos(theta) = 2 sin^2(theta / 2), accurate for the smallest nodes.
    const double s = std::sin(0.5 * theta);
    g.nodes.push_back(interval_hi * s * s);
  }
  return g;
}

/// Threshold above which quantization is guaranteed to keep nodes distinct.
inline double quantization_threshold(double interval_hi, std::size_t node_count) {
  const double n = static_cast<double>(node_count) - 1.0;
  return std::numbers::pi * std::numbers::pi * interval_hi * n * n;
}

/// k_j = ceil(T / xi_j), tau_j = T / k_j. Nodes that already divide T are kept.
inline StepGrid quantize_grid(const StepGrid& grid, double total_time) {
  detail::require(total_time > 0.0 && std::isfinite(total_time), ErrorCode::InvalidArgument,
                  "quantize_grid: total_time must be positive");
  detail::require(!grid.nodes.empty(), ErrorCode::InvalidArgument, "quantize_grid: empty grid");
  StepGrid q;
  q.interval_hi = grid.interval_hi;
  q.total_time = total_time;
  std::vector<std::int64_t> counts;
  for (double xi : grid.nodes) {
    detail::require(xi > 0.0, ErrorCode::InvalidArgument, "quantize_grid: nodes must be positive");
    const double r = total_time / xi;
    detail::require(r < 9.0e15, ErrorCode::InvalidArgument, "quantize_grid: step count overflow");
    double k = std::ceil(r);
    const double nearest = std::round(r);
    // Snap only rounding noise, so that re-quantizing T / k returns k.
    if (std::abs(r - nearest) <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, r)) k = nearest;
    k = std::max(k, 1.0);
    counts.push_back(static_cast<std::int64_t>(k));
    q.nodes.push_back(total_time / k);
  }

  bool distinct = true;
  for (std::size_t j = 1; j < counts.size(); ++j)
    if (!(counts[j] < counts[j - 1]) || !(q.nodes[j] > q.nodes[j - 1])) distinct = false;
  const bool guaranteed = total_time > quantization_threshold(grid.interval_hi, grid.size());
  detail::require(distinct, ErrorCode::InvalidState,
                  std::string("quantize_grid: quantized step counts collide") +
                      (guaranteed ? "" : " (total_time below the distinctness threshold pi^2 * interval_hi * n^2)"));
  q.precondition_warning = !guaranteed;
  q.step_counts = std::move(counts);
  return q;
}

/// 1 / (T^2 l^2 max(ln l, 1)) / max(T^2 max(ln T, 1), 1).
inline double recommended_interval(double l, double T) {
  detail::require(l > 1.0, ErrorCode::Unsupported,
                  "recommended_interval: l <= 1, choose the extrapolation interval manually");
  detail::require(T > 0.0 && std::isfinite(T), ErrorCode::InvalidArgument, "recommended_interval: T must be positive");
  const double base = 1.0 / (T * T * l * l * std::max(std::log(l), 1.0));
  return base / std::max(T * T * std::max(std::log(T), 1.0), 1.0);
}

inline nlohmann::json grid_to_json(const StepGrid& g) {
  nlohmann::json j;
  j["nodes"] = g.nodes;
  j["step_counts"] = g.step_counts ? nlohmann::json(*g.step_counts) : nlohmann::json(nullptr);
  j["interval_hi"] = g.interval_hi;
  j["total_time"] = g.total_time ? nlohmann::json(*g.total_time) : nlohmann::json(nullptr);
  return j;
}

inline StepGrid grid_from_json(const nlohmann::json& j) {
  detail::require(j.is_object() && j.contains("nodes") && j.contains("interval_hi"), ErrorCode::Parse,
                  "grid JSON: requires 'nodes' and 'interval_hi'");
  StepGrid g;
  g.nodes = j.at("nodes").get<std::vector<double>>();
  g.interval_hi = j.at("interval_hi").get<double>();
  if (j.contains("step_counts") && !j.at("step_counts").is_null())
    g.step_counts = j.at("step_counts").get<std::vector<std::int64_t>>();
  if (j.contains("total_time") && !j.at("total_time").is_null()) g.total_time = j.at("total_time").get<double>();
  return g;
}

}  // namespace lindblad
