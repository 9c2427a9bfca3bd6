#pragma once
// Command-line surface: run-spec resolution (config file, then flags), the
// four commands, and the validate report.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qtraj/engine.hpp"
#include "qtraj/ensemble.hpp"
#include "qtraj/errors.hpp"
#include "qtraj/io.hpp"
#include "qtraj/kraus.hpp"
#include "qtraj/qstate.hpp"
#include "qtraj/rng.hpp"
#include "qtraj/version.hpp"

namespace qtraj::cli {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr const char* kOutputDirEnv = "QTRAJ_OUTPUT_DIR";

enum class Command { simulate, sweep, histogram, validate };

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::simulate: return "simulate";
    case Command::sweep: return "sweep";
    case Command::histogram: return "histogram";
    case Command::validate: return "validate";
  }
  return "unknown";
}

inline double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }

/// Named initial states: ee, eg, ge, gg and the Bell states
/// bell1 = (ee-gg)/sqrt2, bell2 = (eg+ge)/sqrt2, bell3 = i(eg-ge)/sqrt2,
/// bell4 = (ee+gg)/sqrt2.
inline PureTwoQubitState named_state(const std::string& name) {
  const double h = 1.0 / std::numbers::sqrt2;
  Vector4c v = Vector4c::Zero();
  if (name == "ee") v(kEE) = 1.0;
  else if (name == "eg") v(kEG) = 1.0;
  else if (name == "ge") v(kGE) = 1.0;
  else if (name == "gg") v(kGG) = 1.0;
  else if (name == "bell1") v << h, 0.0, 0.0, -h;
  else if (name == "bell2") v << 0.0, h, h, 0.0;
  else if (name == "bell3") v << 0.0, cplx(0.0, h), cplx(0.0, -h), 0.0;
  else if (name == "bell4") v << h, 0.0, 0.0, h;
  else throw ConfigError("initial: unknown state '" + name + "'");
  return PureTwoQubitState(v);
}

struct RunSpec {
  Command command = Command::simulate;
  MeasurementConfig cfg;
  double theta_deg = 0.0;
  double vartheta_deg = 90.0;
  std::string initial_name = "ee";  // empty when given as amplitudes
  PureTwoQubitState initial = PureTwoQubitState::excited();
  double t_max = 4.0;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string out;
  std::string trajectory_out;
  unsigned workers = 0;
  SamplerMode sampler = SamplerMode::exact;
  std::size_t snapshot_stride = 10;
  std::vector<double> deltas_deg{0.0, 30.0, 45.0, 60.0, 90.0};
  double threshold = 0.999;
  QuadratureOrder quadrature;
};

inline json to_json(const RunSpec& s) {
  json j = {{"command", std::string(to_string(s.command))},
            {"scheme", std::string(qtraj::to_string(s.cfg.scheme))},
            {"theta_deg", s.theta_deg},
            {"vartheta_deg", s.vartheta_deg},
            {"gamma", s.cfg.gamma},
            {"dt", s.cfg.dt},
            {"t_max", s.t_max},
            {"n", s.n},
            {"seed", s.seed},
            {"workers", s.workers},
            {"sampler", std::string(qtraj::to_string(s.sampler))},
            {"snapshot_stride", s.snapshot_stride},
            {"deltas_deg", s.deltas_deg},
            {"threshold", s.threshold},
            {"gh_nodes", s.quadrature.hermite_nodes},
            {"laguerre_nodes", s.quadrature.laguerre_nodes},
            {"angular_nodes", s.quadrature.angular_nodes}};
  if (s.initial_name.empty()) {
    j["initial"] = io::to_json(s.initial);
  } else {
    j["initial"] = s.initial_name;
  }
  if (!s.out.empty()) j["out"] = s.out;
  if (!s.trajectory_out.empty()) j["trajectory_out"] = s.trajectory_out;
  return j;
}

namespace detail {

template <class T>
T get_key(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

inline void set_initial(RunSpec& s, const json& j) {
  if (j.is_string()) {
    s.initial_name = j.get<std::string>();
    s.initial = named_state(s.initial_name);
    return;
  }
  try {
    s.initial = io::state_from_json(j);
  } catch (const std::exception&) {
    throw ConfigError("config key 'initial' must be a state name or 4 [re, im] pairs");
  }
  s.initial_name.clear();
}

inline void apply_config(RunSpec& s, const json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "scheme") s.cfg.scheme = parse_scheme(get_key<std::string>(v, key));
    else if (key == "theta_deg") s.theta_deg = get_key<double>(v, key);
    else if (key == "vartheta_deg") s.vartheta_deg = get_key<double>(v, key);
    else if (key == "gamma") s.cfg.gamma = get_key<double>(v, key);
    else if (key == "dt") s.cfg.dt = get_key<double>(v, key);
    else if (key == "t_max") s.t_max = get_key<double>(v, key);
    else if (key == "n") s.n = get_key<std::size_t>(v, key);
    else if (key == "seed") s.seed = get_key<std::uint64_t>(v, key);
    else if (key == "out") s.out = get_key<std::string>(v, key);
    else if (key == "trajectory_out") s.trajectory_out = get_key<std::string>(v, key);
    else if (key == "workers") s.workers = get_key<unsigned>(v, key);
    else if (key == "sampler") s.sampler = parse_sampler(get_key<std::string>(v, key));
    else if (key == "snapshot_stride") s.snapshot_stride = get_key<std::size_t>(v, key);
    else if (key == "initial") set_initial(s, v);
    else if (key == "deltas_deg") s.deltas_deg = get_key<std::vector<double>>(v, key);
    else if (key == "threshold") s.threshold = get_key<double>(v, key);
    else if (key == "gh_nodes") s.quadrature.hermite_nodes = get_key<int>(v, key);
    else if (key == "laguerre_nodes") s.quadrature.laguerre_nodes = get_key<int>(v, key);
    else if (key == "angular_nodes") s.quadrature.angular_nodes = get_key<int>(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

inline json read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

inline PureTwoQubitState parse_amplitudes(const std::string& text) {
  std::vector<double> x;
  for (auto f : io::split_csv(text)) {
    try {
      x.push_back(io::parse_double(f));
    } catch (const Error&) {
      throw ConfigError("amplitudes: '" + std::string(f) + "' is not a number");
    }
  }
  if (x.size() != 8) throw ConfigError("amplitudes: expected 8 numbers (re,im for ee,eg,ge,gg)");
  Vector4c v;
  for (int i = 0; i < 4; ++i) v(i) = cplx(x[2 * i], x[2 * i + 1]);
  return PureTwoQubitState(v);
}

/// Flag values and their options, so that only flags actually given
/// override the config file.
struct Flags {
  std::string config, scheme, initial, amplitudes, out, trajectory_out, sampler;
  double theta_deg = 0, vartheta_deg = 0, gamma = 0, dt = 0, t_max = 0, threshold = 0;
  std::size_t n = 0, snapshot_stride = 0;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::vector<double> deltas_deg;
  int gh_nodes = 0, laguerre_nodes = 0, angular_nodes = 0;
  std::vector<std::pair<CLI::Option*, std::function<void(RunSpec&)>>> setters;
};

inline void add_flags(CLI::App& app, Flags& f, Command cmd) {
  auto add = [&](CLI::Option* o, std::function<void(RunSpec&)> set) { f.setters.emplace_back(o, std::move(set)); };
  app.add_option("--config", f.config, "JSON config file; flags override its keys");
  add(app.add_option("--scheme", f.scheme, "photodetection | homodyne | heterodyne"),
      [&f](RunSpec& s) { s.cfg.scheme = parse_scheme(f.scheme); });
  add(app.add_option("--theta-deg", f.theta_deg, "local-oscillator phase on output 3 (degrees)"),
      [&f](RunSpec& s) { s.theta_deg = f.theta_deg; });
  add(app.add_option("--vartheta-deg", f.vartheta_deg, "local-oscillator phase on output 4 (degrees)"),
      [&f](RunSpec& s) { s.vartheta_deg = f.vartheta_deg; });
  add(app.add_option("--gamma", f.gamma, "decay rate 1/T1"), [&f](RunSpec& s) { s.cfg.gamma = f.gamma; });
  add(app.add_option("--dt", f.dt, "timestep"), [&f](RunSpec& s) { s.cfg.dt = f.dt; });
  add(app.add_option("--gh-nodes", f.gh_nodes, "Gauss-Hermite nodes per axis for completeness"),
      [&f](RunSpec& s) { s.quadrature.hermite_nodes = f.gh_nodes; });
  add(app.add_option("--laguerre-nodes", f.laguerre_nodes, "radial nodes for heterodyne completeness"),
      [&f](RunSpec& s) { s.quadrature.laguerre_nodes = f.laguerre_nodes; });
  add(app.add_option("--angular-nodes", f.angular_nodes, "angular nodes for heterodyne completeness"),
      [&f](RunSpec& s) { s.quadrature.angular_nodes = f.angular_nodes; });
  if (cmd == Command::validate) return;

  add(app.add_option("--initial", f.initial, "ee | eg | ge | gg | bell1..bell4"),
      [&f](RunSpec& s) {
        s.initial_name = f.initial;
        s.initial = named_state(f.initial);
      });
  add(app.add_option("--amplitudes", f.amplitudes, "initial state as re,im pairs for ee,eg,ge,gg"),
      [&f](RunSpec& s) {
        s.initial = parse_amplitudes(f.amplitudes);
        s.initial_name.clear();
      });
  add(app.add_option("--t-max", f.t_max, "simulated time"), [&f](RunSpec& s) { s.t_max = f.t_max; });
  add(app.add_option("--n", f.n, cmd == Command::histogram ? "number of heralded samples"
                                                           : "number of trajectories"),
      [&f](RunSpec& s) { s.n = f.n; });
  add(app.add_option("--seed", f.seed, "master seed"), [&f](RunSpec& s) { s.seed = f.seed; });
  add(app.add_option("--out", f.out, "output CSV path"), [&f](RunSpec& s) { s.out = f.out; });
  add(app.add_option("--workers", f.workers, "worker threads (0: all cores)"),
      [&f](RunSpec& s) { s.workers = f.workers; });
  add(app.add_option("--sampler", f.sampler, "exact | gaussian"),
      [&f](RunSpec& s) { s.sampler = parse_sampler(f.sampler); });
  if (cmd == Command::simulate) {
    add(app.add_option("--snapshot-stride", f.snapshot_stride, "state snapshot every k steps (0: none)"),
        [&f](RunSpec& s) { s.snapshot_stride = f.snapshot_stride; });
    add(app.add_option("--trajectory-out", f.trajectory_out,
                       "also write the record of trajectory 0 here"),
        [&f](RunSpec& s) { s.trajectory_out = f.trajectory_out; });
  }
  if (cmd == Command::sweep) {
    add(app.add_option("--deltas", f.deltas_deg, "vartheta - theta values (degrees)")->delimiter(','),
        [&f](RunSpec& s) { s.deltas_deg = f.deltas_deg; });
  }
  if (cmd == Command::histogram) {
    add(app.add_option("--threshold", f.threshold, "herald concurrence threshold"),
        [&f](RunSpec& s) { s.threshold = f.threshold; });
  }
}

inline std::string resolve_output(const std::string& out, Command cmd) {
  const char* dir = std::getenv(kOutputDirEnv);
  const bool have_dir = dir != nullptr && *dir != '\0';
  if (out.empty()) {
    if (!have_dir) {
      throw ConfigError("missing required key 'out' (or set " + std::string(kOutputDirEnv) + ")");
    }
    return (std::filesystem::path(dir) / (std::string(to_string(cmd)) + ".csv")).string();
  }
  std::filesystem::path p(out);
  if (have_dir && p.is_relative()) p = std::filesystem::path(dir) / p;
  return p.string();
}

/// Checks that do not need any compute. validate defers the config check to
/// its own report.
inline void check_spec(RunSpec& s) {
  s.cfg.theta = deg_to_rad(s.theta_deg);
  s.cfg.vartheta = deg_to_rad(s.vartheta_deg);
  if (s.command == Command::validate) return;
  s.cfg.validate();
  if (!(s.t_max > 0.0) || !std::isfinite(s.t_max)) throw ConfigError("t_max must be positive");
  if (s.n < 1) throw ConfigError("n must be at least 1");
  if (!s.initial.is_normalized()) throw ConfigError("initial: amplitudes are not normalized");
  if (s.command == Command::histogram) check_threshold(s.threshold);
  if (s.command == Command::sweep) {
    if (s.cfg.scheme != Scheme::homodyne) {
      throw ConfigError("scheme: sweep varies the homodyne phases and requires scheme = homodyne");
    }
    if (s.deltas_deg.empty()) throw ConfigError("deltas_deg must not be empty");
    for (double d : s.deltas_deg) {
      if (!(d >= 0.0 && d <= 90.0)) throw ConfigError("deltas_deg entries must lie in [0, 90]");
    }
  }
  s.out = resolve_output(s.out, s.command);
  if (!s.trajectory_out.empty()) s.trajectory_out = resolve_output(s.trajectory_out, s.command);
}

}  // namespace detail

/// Thrown for --help; carries the text to print.
struct HelpRequested {
  std::string text;
};

/// argv[0] is the program name. Throws ConfigError on bad values,
/// CLI::ParseError on malformed usage, HelpRequested for --help.
inline RunSpec parse_run_spec(const std::vector<std::string>& args) {
  CLI::App app{"Quantum trajectory simulator for two decaying qubits", "qtraj"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  std::array<detail::Flags, 4> flags;
  std::array<CLI::App*, 4> subs{};
  const std::array<std::pair<Command, const char*>, 4> commands{{
      {Command::simulate, "Run an ensemble and write the mean-concurrence time series"},
      {Command::sweep, "Run one ensemble per phase difference with common seeds"},
      {Command::histogram, "Collect heralded Bell-amplitude samples"},
      {Command::validate, "Check the model invariants and print a pass/fail table"},
  }};
  for (std::size_t i = 0; i < commands.size(); ++i) {
    subs[i] = app.add_subcommand(std::string(to_string(commands[i].first)), commands[i].second);
    detail::add_flags(*subs[i], flags[i], commands[i].first);
  }

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    for (auto* s : subs) {
      if (s->parsed()) throw HelpRequested{s->help()};
    }
    throw HelpRequested{app.help()};
  } catch (const CLI::CallForVersion&) {
    throw HelpRequested{std::string(kVersion) + "\n"};
  }

  RunSpec spec;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    spec.command = commands[i].first;
    const auto& f = flags[i];
    if (!f.config.empty()) detail::apply_config(spec, detail::read_config(f.config));
    for (const auto& [opt, set] : f.setters) {
      if (opt->count() > 0) set(spec);
    }
  }
  detail::check_spec(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// validate

struct CheckResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

namespace detail {

inline CheckResult below(std::string name, double value, double tol, std::string note = {}) {
  return {std::move(name), value, tol, std::isfinite(value) && value < tol, std::move(note)};
}

inline CheckResult not_evaluated(std::string name, double tol, std::string why) {
  return {std::move(name), std::nan(""), tol, false, std::move(why)};
}

/// 2|det| of the homodyne post-state from |ee>, against its closed form,
/// over seeded random draws; returns the worst relative error.
inline double determinant_law_error(std::size_t draws, std::uint64_t seed) {
  RngStream rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double th = 2.0 * std::numbers::pi * rng.uniform();
    const double vt = 2.0 * std::numbers::pi * rng.uniform();
    const double x3 = 3.0 * (2.0 * rng.uniform() - 1.0);
    const double x4 = 3.0 * (2.0 * rng.uniform() - 1.0);
    const double eps = 0.01 * rng.uniform_open_zero();
    const auto k = homodyne_kraus(joint_propagator(eps, th, vt), x3, x4);
    const Vector4c v = k.matrix * PureTwoQubitState::excited().amplitudes();
    const double got = 2.0 * std::abs(v(kEE) * v(kGG) - v(kEG) * v(kGE));
    const double want = eps * (1.0 - eps) / std::numbers::pi * std::exp(-x3 * x3 - x4 * x4) *
                        std::abs(std::polar(1.0, 2.0 * vt) - std::polar(1.0, 2.0 * th));
    if (want > 0.0) worst = std::max(worst, std::abs(got - want) / want);
  }
  return worst;
}

inline double which_path_error(double theta, double vartheta) {
  const auto rule = quad::gauss_hermite(8);
  double worst = 0.0;
  for (Port port : {Port::one, Port::two}) {
    double total = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      for (std::size_t j = 0; j < rule.size(); ++j) {
        const double x3 = rule.nodes[i], x4 = rule.nodes[j];
        const double g = std::exp(-x3 * x3 - x4 * x4);
        total += rule.weights[i] * rule.weights[j] * which_path_density(x3, x4, theta, vartheta, port) / g;
      }
    }
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

inline double pure_vs_mixed_error(std::size_t draws, std::uint64_t seed) {
  RngStream rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    Vector4c v;
    for (int k = 0; k < 4; ++k) v(k) = cplx(rng.normal(), rng.normal());
    const PureTwoQubitState s = PureTwoQubitState(v).normalized();
    const double a = concurrence_pure(s);
    const double b = concurrence_mixed(TwoQubitDensity::from_pure(s));
    worst = std::max(worst, std::abs(a - b));
  }
  return worst;
}

}  // namespace detail

inline std::vector<CheckResult> validation_checks(const RunSpec& spec) {
  using detail::below;
  std::vector<CheckResult> out;
  MeasurementConfig cfg = spec.cfg;
  cfg.theta = deg_to_rad(spec.theta_deg);
  cfg.vartheta = deg_to_rad(spec.vartheta_deg);
  const double eps = cfg.epsilon();

  const auto why = cfg.check();
  out.push_back({"small-step regime (gamma*dt < 0.05)", eps, kMaxEpsilon, !why, why.value_or("")});

  const bool buildable = std::isfinite(eps) && eps >= 0.0 && eps <= 1.0 &&
                         std::isfinite(cfg.theta) && std::isfinite(cfg.vartheta);
  if (buildable) {
    const auto p = joint_propagator(eps, cfg.theta, cfg.vartheta);
    out.push_back(below("propagator isometry", max_abs_deviation_from_identity(isometry_gram(p)), 1e-13));
    out.push_back(below("|11> component vanishes", p.fock[k11].cwiseAbs().maxCoeff(), 1e-14));

    Matrix4c sum = Matrix4c::Zero();
    for (const auto& k : photodetection_kraus(p)) sum += k.matrix.adjoint() * k.matrix;
    out.push_back(below("photodetection completeness", max_abs_deviation_from_identity(sum), 1e-13));

    const auto& q = spec.quadrature;
    const double hom = q.hermite_nodes >= 1
                           ? max_abs_deviation_from_identity(homodyne_completeness_integral(p, q.hermite_nodes))
                           : std::nan("");
    if (q.hermite_nodes < QuadratureOrder::kMinHermite) {
      out.push_back({"homodyne completeness", hom, 1e-12, false,
                     std::to_string(q.hermite_nodes) + " Gauss-Hermite nodes; at least " +
                         std::to_string(QuadratureOrder::kMinHermite) + " required"});
    } else {
      out.push_back(below("homodyne completeness", hom, 1e-12));
    }
    if (q.laguerre_nodes < QuadratureOrder::kMinLaguerre || q.angular_nodes < QuadratureOrder::kMinAngular) {
      out.push_back(detail::not_evaluated("heterodyne completeness", 1e-10, "too few quadrature nodes"));
    } else {
      out.push_back(below("heterodyne completeness",
                          max_abs_deviation_from_identity(
                              heterodyne_completeness_integral(p, q.laguerre_nodes, q.angular_nodes)),
                          1e-10));
    }
  } else {
    for (const char* name : {"propagator isometry", "|11> component vanishes", "photodetection completeness",
                             "homodyne completeness", "heterodyne completeness"}) {
      out.push_back(detail::not_evaluated(name, 0.0, "epsilon outside [0, 1]"));
    }
  }

  if (cfg.gamma > 0.0 && std::isfinite(cfg.gamma)) {
    const double dt_ode = 1e-3 / cfg.gamma;
    const auto ode = mean_concurrence_ode(cfg.gamma, 5.0 / cfg.gamma, dt_ode);
    double worst = 0.0;
    for (std::size_t k = 0; k < ode.size(); ++k) {
      worst = std::max(worst, std::abs(ode[k] - analytic_mean_concurrence(k * dt_ode, cfg.gamma)));
    }
    out.push_back(below("mean-concurrence ODE vs closed form", worst, 1e-8));
  } else {
    out.push_back(detail::not_evaluated("mean-concurrence ODE vs closed form", 1e-8, "gamma not positive"));
  }

  out.push_back(below("homodyne determinant law (relative)", detail::determinant_law_error(100, 7), 1e-12));
  out.push_back(below("which-path density normalization", detail::which_path_error(cfg.theta, cfg.vartheta), 1e-12));
  out.push_back(below("pure vs mixed concurrence", detail::pure_vs_mixed_error(100, 11), 1e-10));
  return out;
}

inline int cmd_validate(const RunSpec& spec, std::ostream& os) {
  const auto checks = validation_checks(spec);
  bool ok = true;
  os << std::left << std::setw(40) << "check" << std::setw(14) << "value" << std::setw(10)
     << "tolerance" << "result\n";
  for (const auto& c : checks) {
    std::ostringstream v, t;
    v << std::setprecision(3) << c.value;
    t << std::setprecision(1) << c.tolerance;
    os << std::left << std::setw(40) << c.name << std::setw(14) << v.str() << std::setw(10) << t.str()
       << (c.pass ? "PASS" : "FAIL");
    if (!c.note.empty()) os << "  (" << c.note << ")";
    os << '\n';
    ok = ok && c.pass;
  }
  if (!ok) {
    for (const auto& c : checks) {
      if (!c.pass) os << "failed: " << c.name << '\n';
    }
  }
  return ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// compute commands

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string delta_path(const std::string& out, double deg) {
  std::filesystem::path p(out);
  std::string name = p.stem().string() + "_delta" + io::format_double(deg) + p.extension().string();
  return (p.parent_path() / name).string();
}

}  // namespace detail

inline int cmd_simulate(const RunSpec& spec, std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  EnsembleOptions eo;
  eo.workers = spec.workers;
  eo.sampler = spec.sampler;
  const auto stats = run_ensemble(spec.initial, spec.cfg, spec.t_max, spec.n, spec.seed, eo);
  io::emit_timeseries(stats, spec.out, {{"spec", to_json(spec)}, {"wall_time_s", detail::seconds_since(t0)}});
  os << "wrote " << spec.out << " (" << stats.n_trajectories << " trajectories, "
     << stats.t.size() << " time points)\n";

  std::string record_path = spec.trajectory_out;
  if (record_path.empty() && spec.n == 1) record_path = spec.out + ".record.csv";
  if (!record_path.empty()) {
    TrajectoryOptions topt;
    topt.snapshot_stride = spec.snapshot_stride;
    topt.sampler = spec.sampler;
    const auto rec = run_trajectory(spec.initial, spec.cfg, spec.t_max, derive_seed(spec.seed, 0), topt);
    io::write_record(record_path, rec);
    os << "wrote " << record_path << " (trajectory 0, replay deviation "
       << replay_deviation(rec) << ")\n";
  }
  return kExitOk;
}

inline int cmd_sweep(const RunSpec& spec, std::ostream& os) {
  std::vector<double> deltas;
  for (double d : spec.deltas_deg) deltas.push_back(deg_to_rad(d));
  EnsembleOptions eo;
  eo.workers = spec.workers;
  eo.sampler = spec.sampler;
  const auto t0 = std::chrono::steady_clock::now();
  const auto all = phase_sweep(deltas, spec.cfg, spec.initial, spec.t_max, spec.n, spec.seed, eo);
  const double wall = detail::seconds_since(t0);
  os << "delta_deg,peak_mean,peak_t,file\n";
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& s = all[i];
    const std::string path = detail::delta_path(spec.out, spec.deltas_deg[i]);
    io::emit_timeseries(s, path, {{"spec", to_json(spec)}, {"delta_deg", spec.deltas_deg[i]}, {"wall_time_s", wall}});
    std::size_t k = 0;
    for (std::size_t j = 1; j < s.mean_concurrence.size(); ++j) {
      if (s.mean_concurrence[j] > s.mean_concurrence[k]) k = j;
    }
    os << io::format_double(spec.deltas_deg[i]) << ',' << s.mean_concurrence[k] << ',' << s.t[k] << ','
       << path << '\n';
  }
  return kExitOk;
}

inline int cmd_histogram(const RunSpec& spec, std::ostream& os, std::ostream& err) {
  EnsembleOptions eo;
  eo.workers = spec.workers;
  eo.sampler = spec.sampler;
  const auto t0 = std::chrono::steady_clock::now();
  const auto run = collect_heralds(spec.initial, spec.cfg, spec.t_max, spec.n, spec.seed, spec.threshold, eo);
  if (run.samples.size() < spec.n) {
    err << "warning: found " << run.samples.size() << " of " << spec.n << " requested heralds\n";
  }
  io::emit_histogram(run.samples, spec.out,
                     {{"spec", to_json(spec)},
                      {"trajectories", run.trajectories},
                      {"wall_time_s", detail::seconds_since(t0)}},
                     err);
  os << "wrote " << spec.out << " (" << run.samples.size() << " heralds from " << run.trajectories
     << " trajectories)\n";
  return kExitOk;
}

/// Full CLI: parse, dispatch, map errors to exit codes.
inline int run(const std::vector<std::string>& args, std::ostream& os = std::cout,
               std::ostream& err = std::cerr) {
  RunSpec spec;
  try {
    spec = parse_run_spec(args);
  } catch (const HelpRequested& h) {
    os << h.text;
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    switch (spec.command) {
      case Command::simulate: return cmd_simulate(spec, os);
      case Command::sweep: return cmd_sweep(spec, os);
      case Command::histogram: return cmd_histogram(spec, os, err);
      case Command::validate: return cmd_validate(spec, os);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace qtraj::cli
