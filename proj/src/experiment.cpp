#include "lindblad/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace lindblad {

GridKind grid_kind_from_string(std::string_view s) {
  if (s == "equidistant") return GridKind::Equidistant;
  if (s == "chebyshev") return GridKind::Chebyshev;
  throw Error(ErrorCode::Parse, "unknown grid kind '" + std::string(s) + "' (expected equidistant|chebyshev)");
}

namespace {

std::string where(const std::string& source, const YAML::Node& node) {
  const YAML::Mark m = node.Mark();
  if (m.line < 0) return source;
  return source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

[[noreturn]] void fail(const std::string& source, const YAML::Node& node, const std::string& msg) {
  throw ConfigError(where(source, node) + ": " + msg);
}

void check_keys(const std::string& source, const YAML::Node& node, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail(source, node, "'" + section + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(source, kv.first, "unknown key '" + key + "' in '" + section + "'");
  }
}

template <class T>
T get(const std::string& source, const YAML::Node& parent, const char* key, T fallback) {
  const YAML::Node n = parent[key];
  if (!n) return fallback;
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(source, n, std::string("key '") + key + "': wrong type");
  }
}

template <class Parse>
auto get_enum(const std::string& source, const YAML::Node& parent, const char* key, Parse parse,
              decltype(parse(std::string_view{})) fallback) {
  const YAML::Node n = parent[key];
  if (!n) return fallback;
  try {
    return parse(n.as<std::string>());
  } catch (const std::exception& e) {
    fail(source, n, std::string("key '") + key + "': " + e.what());
  }
}

ExperimentConfig parse_config(const YAML::Node& root, const std::string& source) {
  ExperimentConfig c;
  check_keys(source, root, "root",
             {"name", "model", "integrator", "total_time", "grid", "extrapolation", "shots", "reference"});
  c.name = get<std::string>(source, root, "name", c.name);

  if (const auto m = root["model"]) {
    check_keys(source, m, "model", {"zoo", "seed", "scale", "n_q", "omega", "omega_r", "coupling_j", "gamma"});
    c.model.zoo = get<std::string>(source, m, "zoo", c.model.zoo);
    if (c.model.zoo != "tfim" && c.model.zoo != "random16")
      fail(source, m["zoo"], "unknown zoo model '" + c.model.zoo + "' (expected tfim|random16)");
    c.model.seed = get<std::uint64_t>(source, m, "seed", c.model.seed);
    c.model.scale = get<double>(source, m, "scale", c.model.scale);
    if (!(c.model.scale > 0.0)) fail(source, m["scale"], "scale must be positive");
    c.model.tfim.n_q = get<int>(source, m, "n_q", c.model.tfim.n_q);
    if (c.model.tfim.n_q < 1 || c.model.tfim.n_q > 12) fail(source, m["n_q"], "n_q must be in [1, 12]");
    c.model.tfim.omega = get<double>(source, m, "omega", c.model.tfim.omega);
    c.model.tfim.omega_r = get<double>(source, m, "omega_r", c.model.tfim.omega_r);
    c.model.tfim.coupling_j = get<double>(source, m, "coupling_j", c.model.tfim.coupling_j);
    c.model.tfim.gamma = get<double>(source, m, "gamma", c.model.tfim.gamma);
    if (c.model.tfim.gamma < 0.0) fail(source, m["gamma"], "gamma must be >= 0");
  }

  c.integrator = get_enum(source, root, "integrator", integrator_from_string, c.integrator);
  c.total_time = get<double>(source, root, "total_time", c.total_time);
  if (!(c.total_time > 0.0)) fail(source, root["total_time"], "total_time must be positive");

  if (const auto g = root["grid"]) {
    check_keys(source, g, "grid", {"kind", "kinds", "n", "interval", "quantize"});
    if (g["kind"] && g["kinds"]) fail(source, g, "give either 'kind' or 'kinds', not both");
    if (const auto k = g["kind"]) c.grid.kinds = {get_enum(source, g, "kind", grid_kind_from_string, GridKind::Chebyshev)};
    if (const auto ks = g["kinds"]) {
      if (!ks.IsSequence() || ks.size() == 0) fail(source, ks, "'kinds' must be a non-empty list");
      c.grid.kinds.clear();
      for (const auto& k : ks) {
        try {
          c.grid.kinds.push_back(grid_kind_from_string(k.as<std::string>()));
        } catch (const std::exception& e) {
          fail(source, k, e.what());
        }
      }
    }
    c.grid.n = get<int>(source, g, "n", c.grid.n);
    if (c.grid.n < 1) fail(source, g["n"], "n must be >= 1");
    if (const auto iv = g["interval"]) {
      if (iv.IsScalar() && iv.Scalar() == "auto") {
        c.grid.interval.reset();
      } else {
        const double v = get<double>(source, g, "interval", 0.0);
        if (!(v > 0.0)) fail(source, iv, "interval must be positive or \"auto\"");
        c.grid.interval = v;
      }
    }
    c.grid.quantize = get<bool>(source, g, "quantize", c.grid.quantize);
  }

  if (const auto e = root["extrapolation"]) {
    check_keys(source, e, "extrapolation", {"method", "degree"});
    c.extrapolation.method =
        get_enum(source, e, "method", extrapolation_method_from_string, c.extrapolation.method);
    c.extrapolation.degree = get<int>(source, e, "degree", -1);
    const int nodes = c.grid.n + 1;
    if (c.extrapolation.method == ExtrapolationMethod::Interpolation) {
      if (c.extrapolation.degree == -1) c.extrapolation.degree = c.grid.n;
      if (c.extrapolation.degree != c.grid.n)
        fail(source, e["degree"], "interpolation degree must equal node count - 1 (" + std::to_string(c.grid.n) + ")");
    } else if (c.extrapolation.degree < 0 || c.extrapolation.degree >= nodes - 1) {
      fail(source, e["degree"] ? e["degree"] : e,
           "regression degree must be in [0, " + std::to_string(nodes - 2) + "]");
    }
  } else {
    c.extrapolation.degree = c.grid.n;
  }

  if (const auto s = root["shots"]) {
    check_keys(source, s, "shots", {"n_shots", "seed", "mode", "trials"});
    c.shots.n_shots = static_cast<std::int64_t>(get<double>(source, s, "n_shots", static_cast<double>(c.shots.n_shots)));
    if (c.shots.n_shots < 1) fail(source, s["n_shots"], "n_shots must be >= 1");
    c.shots.seed = get<std::uint64_t>(source, s, "seed", c.shots.seed);
    c.shots.mode = get_enum(source, s, "mode", shot_mode_from_string, c.shots.mode);
    c.shots.trials = get<int>(source, s, "trials", c.shots.trials);
    if (c.shots.trials < 1) fail(source, s["trials"], "trials must be >= 1");
  }

  if (const auto r = root["reference"]) {
    check_keys(source, r, "reference", {"tol"});
    c.reference_tol = get<double>(source, r, "tol", c.reference_tol);
    if (!(c.reference_tol > 0.0)) fail(source, r["tol"], "tol must be positive");
  }
  if (!c.grid.quantize) fail(source, root["grid"], "curves require quantize: true (integer step counts)");
  return c;
}

}  // namespace

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json model = {{"zoo", c.model.zoo}, {"seed", c.model.seed}, {"scale", c.model.scale}};
  if (c.model.zoo == "tfim") {
    model["n_q"] = c.model.tfim.n_q;
    model["omega"] = c.model.tfim.omega;
    model["omega_r"] = c.model.tfim.omega_r;
    model["coupling_j"] = c.model.tfim.coupling_j;
    model["gamma"] = c.model.tfim.gamma;
  }
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : c.grid.kinds) kinds.push_back(std::string(to_string(k)));
  return {{"name", c.name},
          {"model", model},
          {"integrator", std::string(to_string(c.integrator))},
          {"total_time", c.total_time},
          {"grid",
           {{"kinds", kinds},
            {"n", c.grid.n},
            {"interval", c.grid.interval ? nlohmann::json(*c.grid.interval) : nlohmann::json("auto")},
            {"quantize", c.grid.quantize}}},
          {"extrapolation",
           {{"method", std::string(to_string(c.extrapolation.method))}, {"degree", c.extrapolation.degree}}},
          {"shots",
           {{"n_shots", c.shots.n_shots},
            {"seed", c.shots.seed},
            {"mode", std::string(to_string(c.shots.mode))},
            {"trials", c.shots.trials}}},
          {"reference", {{"tol", c.reference_tol}}}};
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) + ": " +
                      e.msg);
  }
  return parse_config(root, source);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    if (j.contains("config")) j = j["config"];
    return parse_config_text(j.dump(), path.string());
  }
  return parse_config_text(text, path.string());
}

ModelBundle build_model(const ModelSpec& spec) {
  if (spec.zoo == "tfim") return build_tfim(spec.tfim);
  return zoo_model(spec.zoo, spec.seed, spec.scale);
}

ResolvedExperiment resolve(const ExperimentConfig& c) {
  ModelBundle b = build_model(c.model);
  LindbladModel scaled = rescale_model(b.model, c.total_time);
  const double l = generator_bound(b.model);
  const double ref =
      expectation(exact_evolve(b.model, b.initial_state, c.total_time, c.reference_tol).state, b.observable);
  return ResolvedExperiment{std::move(b), std::move(scaled), l, ref};
}

double resolved_interval(const ExperimentConfig& c, double l) {
  if (c.grid.interval) return *c.grid.interval;
  return recommended_interval(l, c.total_time);
}

StepGrid build_grid(const ExperimentConfig& c, GridKind kind, double l) {
  const double hi = resolved_interval(c, l);
  const StepGrid g = kind == GridKind::Equidistant ? equidistant_grid(hi, c.grid.n) : chebyshev_grid(hi, c.grid.n);
  return quantize_grid(g, 1.0);
}

CurveRun run_curve(const ExperimentConfig& c, const ResolvedExperiment& r, GridKind kind, unsigned jobs) {
  CurveRun run;
  run.kind = kind;
  run.grid = build_grid(c, kind, r.l);
  const auto states = curve_states(r.scaled_model, r.bundle.initial_state, run.grid, c.integrator, jobs);
  run.noiseless = noiseless_values(states, r.bundle.observable);
  const SpectralObservable spec(r.bundle.observable);
  run.trials.resize(static_cast<std::size_t>(c.shots.trials));
  detail::parallel_for(run.trials.size(), jobs, [&](std::size_t t) {
    run.trials[t] = sample_curve(states, spec, c.shots.n_shots, c.shots.seed, t, c.shots.mode);
  });
  run.weights = make_weights(run.grid, c.extrapolation.method, c.extrapolation.degree);
  return run;
}

/// curve.csv: node_index,tau,step_count,n_shots,mean,seed,noiseless,reference.
void write_curve_table(std::ostream& os, const CurveRun& run, std::size_t trial, double reference) {
  const auto old = os.precision(17);
  os << "node_index,tau,step_count,n_shots,mean,seed,noiseless,reference\n";
  const auto& est = run.trials.at(trial);
  for (std::size_t j = 0; j < est.size(); ++j)
    os << j << ',' << run.grid.nodes[j] << ',' << (*run.grid.step_counts)[j] << ',' << est[j].n_shots << ','
       << est[j].mean << ',' << est[j].seed << ',' << run.noiseless[j] << ',' << reference << '\n';
  os.precision(old);
}

nlohmann::json curve_to_json(const CurveRun& run, std::size_t trial, double reference) {
  nlohmann::json rows = nlohmann::json::array();
  const auto& est = run.trials.at(trial);
  for (std::size_t j = 0; j < est.size(); ++j)
    rows.push_back({{"node_index", j},
                    {"tau", run.grid.nodes[j]},
                    {"step_count", (*run.grid.step_counts)[j]},
                    {"n_shots", est[j].n_shots},
                    {"mean", est[j].mean},
                    {"seed", est[j].seed},
                    {"noiseless", run.noiseless[j]},
                    {"reference", reference}});
  return {{"grid", grid_to_json(run.grid)}, {"trial", trial}, {"rows", rows}};
}

nlohmann::json result_with_reference(const ExtrapolationResult& res, std::optional<double> reference) {
  nlohmann::json j = result_to_json(res);
  if (reference) {
    j["reference"] = *reference;
    j["error"] = std::abs(res.value_at_zero - *reference);
  }
  return j;
}

nlohmann::json meta_json(const ExperimentConfig& c, const ResolvedExperiment& r,
                                const std::vector<const CurveRun*>& runs) {
  nlohmann::json grids = nlohmann::json::object();
  for (const auto* run : runs) {
    nlohmann::json g = grid_to_json(run->grid);
    g["precondition_warning"] = run->grid.precondition_warning;
    g["gamma_l1"] = run->weights.gamma_l1;
    grids[std::string(to_string(run->kind))] = g;
  }
  return {{"config", config_to_json(c)},
          {"library_version", kLibraryVersion},
          {"generator_bound", r.l},
          {"dim", r.bundle.model.dim()},
          {"interval_hi", resolved_interval(c, r.l)},
          {"time_units", "rescaled: tau is a step of s = t / total_time"},
          {"initial_state", c.model.zoo == "tfim" ? "|0...0>" : "seeded random pure state"},
          {"reference", r.reference},
          {"grids", grids}};
}

ReproduceSummary reproduce(const ExperimentConfig& c, const ResolvedExperiment& r, unsigned jobs) {
  ReproduceSummary s;
  for (GridKind k : c.grid.kinds) {
    s.runs.push_back(run_curve(c, r, k, jobs));
    std::vector<double> errs;
    for (const auto& t : s.runs.back().trials)
      errs.push_back(std::abs(extrapolate(s.runs.back().weights, means(t)).value_at_zero - r.reference));
    s.errors.push_back(std::move(errs));
  }
  int eq = -1, ch = -1;
  for (std::size_t g = 0; g < c.grid.kinds.size(); ++g)
    (c.grid.kinds[g] == GridKind::Equidistant ? eq : ch) = static_cast<int>(g);
  if (eq >= 0 && ch >= 0) {
    s.chebyshev_wins = 0;
    for (int t = 0; t < c.shots.trials; ++t)
      if (s.errors[ch][t] < s.errors[eq][t]) ++s.chebyshev_wins;
  }
  return s;
}

}  // namespace lindblad
