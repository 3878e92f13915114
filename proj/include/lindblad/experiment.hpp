#pragma once

// Config-driven pipelines behind the lindblad_extrap tool (src/experiment.cpp,
// target lindblad_experiment).

#include "lindblad.hpp"

#include <json.hpp>

#include <filesystem>
#include <ostream>
#include <optional>
#include <string>
#include <vector>

namespace lindblad {

inline constexpr const char* kLibraryVersion = "0.3.0";

enum class GridKind { Equidistant, Chebyshev };

inline std::string_view to_string(GridKind k) { return k == GridKind::Equidistant ? "equidistant" : "chebyshev"; }

struct ModelSpec {
  std::string zoo = "random16";
  std::uint64_t seed = 1;
  double scale = 1.0;
  TfimParams tfim;
};

struct GridSpec {
  std::vector<GridKind> kinds{GridKind::Chebyshev};
  int n = 8;
  /// Empty means "auto": recommended_interval(l, T).
  std::optional<double> interval;
  bool quantize = true;
};

struct ExtrapolationSpec {
  ExtrapolationMethod method = ExtrapolationMethod::Interpolation;
  int degree = -1;
};

struct ShotSpec {
  std::int64_t n_shots = 1000;
  std::uint64_t seed = 1;
  ShotMode mode = ShotMode::Born;
  int trials = 1;
};

/// Step sizes live in rescaled time s = t / T, so the grid is quantized
/// against a total time of 1 and the model generator is T L.
struct ExperimentConfig {
  std::string name = "experiment";
  ModelSpec model;
  IntegratorKind integrator = IntegratorKind::KrausFirstOrder;
  double total_time = 1.0;
  GridSpec grid;
  ExtrapolationSpec extrapolation;
  ShotSpec shots;
  double reference_tol = 1e-10;
};

/// Invalid configuration, tagged with the source location when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::Parse, what) {}
};

GridKind grid_kind_from_string(std::string_view s);

/// Parses YAML config text; `source` prefixes error locations.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source);
nlohmann::json config_to_json(const ExperimentConfig& c);
/// Loads a YAML config, or a meta.json written by a previous run (its
/// "config" object is used).
ExperimentConfig load_config(const std::filesystem::path& path);

struct ResolvedExperiment {
  ModelBundle bundle;
  /// Generator T L; grids and step counts refer to this model over unit time.
  LindbladModel scaled_model;
  /// Generator bound of the unscaled model.
  double l = 0.0;
  double reference = 0.0;
};

ModelBundle build_model(const ModelSpec& spec);
/// Builds the model and its reference value Tr(O e^{T L} rho0).
ResolvedExperiment resolve(const ExperimentConfig& c);
double resolved_interval(const ExperimentConfig& c, double l);
/// Grid of the given kind, quantized against unit (rescaled) time.
StepGrid build_grid(const ExperimentConfig& c, GridKind kind, double l);

/// Noiseless values plus one noisy draw per trial for a single grid.
struct CurveRun {
  GridKind kind = GridKind::Chebyshev;
  StepGrid grid;
  std::vector<double> noiseless;
  /// trials[t][j]: estimate at node j in trial t, stream (seed, j, t).
  std::vector<std::vector<ShotEstimate>> trials;
  ExtrapolationWeights weights;
};

CurveRun run_curve(const ExperimentConfig& c, const ResolvedExperiment& r, GridKind kind, unsigned jobs);
/// curve.csv: node_index,tau,step_count,n_shots,mean,seed,noiseless,reference.
void write_curve_table(std::ostream& os, const CurveRun& run, std::size_t trial, double reference);
nlohmann::json curve_to_json(const CurveRun& run, std::size_t trial, double reference);
nlohmann::json result_with_reference(const ExtrapolationResult& res, std::optional<double> reference);
nlohmann::json meta_json(const ExperimentConfig& c, const ResolvedExperiment& r,
                         const std::vector<const CurveRun*>& runs);

/// Per-trial extrapolation errors for every grid of a config.
struct ReproduceSummary {
  std::vector<CurveRun> runs;
  /// errors[g][t] = |p(0) - reference| for grid g, trial t.
  std::vector<std::vector<double>> errors;
  int chebyshev_wins = -1;
};

ReproduceSummary reproduce(const ExperimentConfig& c, const ResolvedExperiment& r, unsigned jobs);

}  // namespace lindblad
