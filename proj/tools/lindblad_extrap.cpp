// lindblad_extrap: curves, extrapolation, theory checks and figure recipes.

#include "lindblad/experiment.hpp"
#include "lindblad/verify.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace lindblad;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

#ifndef LINDBLAD_CONFIG_DIR
#define LINDBLAD_CONFIG_DIR "configs"
#endif

struct CommonOptions {
  std::string config;
  std::string out = "out";
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string format = "csv";
  bool dry_run = false;
};

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidState, "cannot write " + path.string());
  f << text;
  spdlog::info("wrote {}", path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

ExperimentConfig load_with_overrides(const std::string& path, const CommonOptions& o) {
  ExperimentConfig c = load_config(path);
  if (o.seed) c.shots.seed = *o.seed;
  if (o.trials) {
    if (*o.trials < 1) throw ConfigError("--trials must be >= 1");
    c.shots.trials = *o.trials;
  }
  return c;
}

void emit_curve(const fs::path& dir, const ExperimentConfig& c, const CurveRun& run, double reference,
                const std::string& format) {
  if (format == "json") {
    write_json(dir / "curve.json", curve_to_json(run, 0, reference));
  } else {
    std::ostringstream os;
    write_curve_table(os, run, 0, reference);
    write_text(dir / "curve.csv", os.str());
  }
  const ExtrapolationResult res = extrapolate(run.weights, means(run.trials[0]));
  nlohmann::json j = result_with_reference(res, reference);
  j["grid"] = std::string(to_string(run.kind));
  j["config"] = config_to_json(c);
  write_json(dir / "result.json", j);
}

int cmd_curve(const CommonOptions& o, const std::string& grid_override) {
  ExperimentConfig c = load_with_overrides(o.config, o);
  if (!grid_override.empty()) c.grid.kinds = {grid_kind_from_string(grid_override)};
  c.shots.trials = 1;
  if (o.dry_run) {
    std::cout << config_to_json(c).dump(2) << "\n";
    return kExitOk;
  }
  const ResolvedExperiment r = resolve(c);
  const CurveRun run = run_curve(c, r, c.grid.kinds.front(), o.jobs);
  if (run.grid.precondition_warning)
    spdlog::warn("quantized nodes are distinct but the distinctness guarantee threshold is not met");
  emit_curve(o.out, c, run, r.reference, o.format);
  write_json(fs::path(o.out) / "meta.json", meta_json(c, r, {&run}));
  return kExitOk;
}

struct CsvCurve {
  std::vector<double> tau;
  std::vector<double> mean;
  std::optional<std::vector<std::int64_t>> step_counts;
  std::optional<double> reference;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvCurve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open curve file");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ":1: empty curve file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"tau", "mean"})
    if (!col.count(need)) throw ConfigError(path + ":1: missing column '" + std::string(need) + "'");
  CsvCurve c;
  if (col.count("step_count")) c.step_counts.emplace();
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(cells.size()));
    auto num = [&](const std::string& name) {
      const std::string& s = cells[col.at(name)];
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0')
        throw ConfigError(path + ":" + std::to_string(lineno) + ": column '" + name + "' is not a number");
      return v;
    };
    c.tau.push_back(num("tau"));
    c.mean.push_back(num("mean"));
    if (c.step_counts) c.step_counts->push_back(static_cast<std::int64_t>(num("step_count")));
    if (col.count("reference")) c.reference = num("reference");
  }
  if (c.tau.empty()) throw ConfigError(path + ": curve file has no rows");
  return c;
}

int cmd_extrapolate(const std::string& curve_path, const std::string& method, int degree, const std::string& out) {
  const CsvCurve curve = read_curve_csv(curve_path);
  StepGrid g;
  g.nodes = curve.tau;
  g.interval_hi = *std::max_element(curve.tau.begin(), curve.tau.end());
  g.step_counts = curve.step_counts;
  ExtrapolationMethod m;
  try {
    m = extrapolation_method_from_string(method);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (m == ExtrapolationMethod::Regression &&
      (degree < 0 || degree >= static_cast<int>(g.size()) - 1))
    throw ConfigError("regression degree must be in [0, node_count - 2]");
  ExtrapolationWeights w;
  try {
    w = make_weights(g, m, degree);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw ConfigError(e.what());
    throw;
  }
  const ExtrapolationResult res = extrapolate(w, curve.mean);
  nlohmann::json j = result_with_reference(res, curve.reference);
  if (curve.reference) {
    double best = std::numeric_limits<double>::infinity();
    for (double v : curve.mean) best = std::min(best, std::abs(v - *curve.reference));
    j["best_single_node_error"] = best;
  }
  if (out.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_json(fs::path(out) / "result.json", j);
  return kExitOk;
}

int cmd_verify(const std::string& scope, const std::vector<double>& ls, const std::string& out) {
  static const std::set<std::string> scopes{"sequences", "gevrey", "dilation", "nodes", "all"};
  if (!scopes.count(scope)) throw ConfigError("unknown scope '" + scope + "'");
  nlohmann::json report;
  bool pass = true;
  auto run = [&](const std::string& name, auto&& fn) {
    if (scope != "all" && scope != name) return;
    spdlog::info("verifying {}", name);
    const VerifyOutcome v = fn();
    report[name] = v.report;
    pass = pass && v.pass;
    spdlog::info("{}: {}", name, v.pass ? "pass" : "FAIL");
  };
  run("sequences", [&] { return verify_sequences(ls); });
  run("gevrey", [] { return verify_gevrey(); });
  run("dilation", [] { return verify_dilation(); });
  run("nodes", [] { return verify_nodes(); });
  report["pass"] = pass;
  report["log_base"] = "e";
  if (out.empty())
    std::cout << report.dump(2) << "\n";
  else
    write_json(fs::path(out) / "verify.json", report);
  return pass ? kExitOk : kExitRuntime;
}

/// Input for the plotting script: one panel per grid, paths relative to this file.
nlohmann::json figure_spec(const std::string& fig, const ExperimentConfig& c, const std::string& format) {
  nlohmann::json panels = nlohmann::json::array();
  const char* sides[] = {"left", "right"};
  for (std::size_t g = 0; g < c.grid.kinds.size(); ++g) {
    const std::string kind(to_string(c.grid.kinds[g]));
    panels.push_back({{"position", g < 2 ? sides[g] : "extra"},
                      {"title", kind == "equidistant" ? "Equidistant time steps" : "Perturbed Chebyshev time steps"},
                      {"curve", kind + "/curve." + format},
                      {"result", kind + "/result.json"}});
  }
  return {{"figure", fig},
          {"panels", panels},
          {"x_label", "step size tau (rescaled time)"},
          {"y_label", "expectation value"},
          {"output", fig + ".png"}};
}

int cmd_reproduce(const std::string& fig, CommonOptions o) {
  static const std::set<std::string> figs{"fig1", "fig2", "fig3", "fig4"};
  if (!figs.count(fig)) throw ConfigError("unknown figure '" + fig + "' (expected fig1..fig4)");
  if (o.config.empty()) {
    fs::path p = fs::path("configs") / (fig + ".yaml");
    if (!fs::exists(p)) p = fs::path(LINDBLAD_CONFIG_DIR) / (fig + ".yaml");
    o.config = p.string();
  }
  const ExperimentConfig c = load_with_overrides(o.config, o);
  if (o.dry_run) {
    std::cout << config_to_json(c).dump(2) << "\n";
    return kExitOk;
  }
  const ResolvedExperiment r = resolve(c);
  const ReproduceSummary s = reproduce(c, r, o.jobs);
  const fs::path dir = fs::path(o.out) / fig;
  std::vector<const CurveRun*> runs;
  nlohmann::json errors = nlohmann::json::object();
  for (std::size_t g = 0; g < s.runs.size(); ++g) {
    const CurveRun& run = s.runs[g];
    runs.push_back(&run);
    emit_curve(dir / std::string(to_string(run.kind)), c, run, r.reference, o.format);
    errors[std::string(to_string(run.kind))] = s.errors[g];
  }
  write_json(dir / "meta.json", meta_json(c, r, runs));
  nlohmann::json summary = {{"figure", fig},
                            {"reference", r.reference},
                            {"trials", c.shots.trials},
                            {"errors", errors},
                            {"shot_mode", std::string(to_string(c.shots.mode))},
                            {"config", config_to_json(c)}};
  if (s.chebyshev_wins >= 0) {
    summary["chebyshev_wins"] = s.chebyshev_wins;
    spdlog::info("{}: chebyshev beats equidistant in {}/{} trials", fig, s.chebyshev_wins, c.shots.trials);
  }
  write_json(dir / "summary.json", summary);
  write_json(dir / "figure_spec.json", figure_spec(fig, c, o.format));
  return kExitOk;
}

void add_common(CLI::App* app, CommonOptions& o, bool need_config) {
  auto* cfg = app->add_option("--config", o.config, "Experiment config (YAML, or a previous meta.json)");
  if (need_config) cfg->required();
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "Override the shot-noise master seed");
  app->add_option("--trials", o.trials, "Override the number of noise trials");
  app->add_option("--format", o.format, "Curve output format")->check(CLI::IsMember({"csv", "json"}));
  app->add_flag("--dry-run", o.dry_run, "Print the resolved config and exit");
}

void configure_logging() {
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("LINDBLAD_EXTRAP_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
  spdlog::set_pattern("[%l] %v");
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Lindblad step-size extrapolation experiments"};
  app.require_subcommand(1);

  CommonOptions curve_opts;
  std::string grid_override;
  auto* curve = app.add_subcommand("curve", "Evolve on a quantized grid and sample noisy node values");
  add_common(curve, curve_opts, true);
  curve->add_option("--grid", grid_override, "Grid kind (defaults to the first in the config)")
      ->check(CLI::IsMember({"equidistant", "chebyshev"}));

  std::string curve_file, method = "interpolation", extrap_out;
  int degree = -1;
  auto* ex = app.add_subcommand("extrapolate", "Extrapolate a curve file to zero step size");
  ex->add_option("--curve", curve_file, "curve.csv")->required();
  ex->add_option("--method", method, "interpolation|richardson|regression");
  ex->add_option("--degree", degree, "Regression degree");
  ex->add_option("--out", extrap_out, "Output directory (stdout if omitted)");

  std::string scope = "all", verify_out;
  std::vector<double> ls{1.5, 2.0, 4.0, 8.0};
  auto* ver = app.add_subcommand("verify", "Run theory and property checks");
  ver->add_option("--scope", scope, "sequences|gevrey|dilation|nodes|all");
  ver->add_option("--l", ls, "Generator bounds for the sequence checks");
  ver->add_option("--out", verify_out, "Output directory (stdout if omitted)");

  CommonOptions rep_opts;
  std::string fig;
  auto* rep = app.add_subcommand("reproduce", "Run a figure recipe");
  rep->add_option("figure", fig, "fig1|fig2|fig3|fig4")->required();
  add_common(rep, rep_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*curve) return cmd_curve(curve_opts, grid_override);
    if (*ex) return cmd_extrapolate(curve_file, method, degree, extrap_out);
    if (*ver) return cmd_verify(scope, ls, verify_out);
    if (*rep) return cmd_reproduce(fig, rep_opts);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.code() == ErrorCode::Unsupported || e.code() == ErrorCode::Parse ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
