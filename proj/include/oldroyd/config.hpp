#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oldroyd/energy.hpp"
#include "oldroyd/errors.hpp"
#include "oldroyd/leray.hpp"
#include "oldroyd/transport.hpp"

namespace oldroyd {

struct GridConfig {
  int dim = 2;
  std::vector<int> n{64, 64};
  std::vector<double> box_length{2.0 * std::numbers::pi, 2.0 * std::numbers::pi};
  bool dealias = true;

  template <int Dim>
  GridSpec<Dim> spec() const {
    if (dim != Dim) throw InvalidArgument("grid dimension mismatch");
    GridSpec<Dim> s;
    for (int d = 0; d < Dim; ++d) {
      s.n[d] = n.at(static_cast<std::size_t>(d));
      s.box_length[d] = box_length.at(static_cast<std::size_t>(d));
    }
    s.dealias = dealias;
    s.validate();
    return s;
  }
};

enum class InitialKind { taylor_green, random_smooth, single_mode, from_checkpoint };

struct InitialConfig {
  InitialKind kind = InitialKind::taylor_green;
  double amplitude = 1e-3;     // ||A u0|| + ||u0||_{H1} + ||tau0||_{H2}
  double tau_fraction = 0.0;   // share of the amplitude carried by tau0
  std::vector<int> mode{1, 0}; // integer wavevector for single_mode
  double cutoff = 4.0;         // random_smooth: |k| beyond which the spectrum decays like exp(-|k|)
  std::string checkpoint;      // from_checkpoint: path of the checkpoint file
};

struct EnergyConfig {
  EnergyConstants constants;  // delta0 <= 0 means: derive from big_c and m1
  double big_c_floor = 1.0;
  double budget_rtol = 1e-3;
  std::vector<double> calibration_amplitudes;  // empty: half and twice the run amplitude
};

struct AdaptiveConfig {
  bool enabled = false;
  double grow = 1.2;
  int clean_steps = 5;
};

struct SweepConfig {
  std::vector<double> alpha;
  std::vector<double> amplitude;
};

struct SolverConfig {
  GridConfig grid;
  PhysicalParams params{1.0, 1.0, 0.9, 1.0};
  double dt = 1e-3;
  double t_end = 1.0;
  double picard_tol = 1e-10;
  int picard_max_iter = 25;
  int output_every = 10;
  int checkpoint_every = 0;
  std::uint64_t seed = 42;
  double dt_floor = 1e-8;
  InitialConfig initial;
  EnergyConfig energy;
  double cfl_safety = 0.5;
  CflPolicy cfl_policy = CflPolicy::error;
  AdaptiveConfig adaptive;
  SweepConfig sweep;

  /// Number of nominal steps from t_start to t_end.
  long long steps_from(double t_start) const {
    const double span = t_end - t_start;
    const double raw = span / dt;
    const auto n = static_cast<long long>(std::llround(raw));
    if (n < 0 || std::abs(raw - static_cast<double>(n)) > 1e-6 * std::max(1.0, raw)) {
      std::ostringstream os;
      os << "t_end - t_start = " << span << " is not a whole number of steps of dt = " << dt;
      throw InvalidArgument(os.str());
    }
    return n;
  }

  /// Constants with delta0 filled in when it was left to be derived.
  EnergyConstants resolved_constants() const {
    EnergyConstants c = energy.constants;
    if (!(c.delta0 > 0.0)) c.delta0 = compute_delta0(c.big_c, c.m1);
    c.validate();
    return c;
  }

  void validate() const {
    if (grid.dim != 2 && grid.dim != 3) throw InvalidArgument("grid.dim must be 2 or 3");
    if (grid.n.size() != static_cast<std::size_t>(grid.dim) ||
        grid.box_length.size() != static_cast<std::size_t>(grid.dim)) {
      throw InvalidArgument("grid.n and grid.box_length need one entry per dimension");
    }
    if (grid.dim == 2) {
      (void)grid.spec<2>();
    } else {
      (void)grid.spec<3>();
    }
    params.validate();
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!(t_end > 0.0)) throw InvalidArgument("t_end must be positive");
    if (!(picard_tol > 0.0)) throw InvalidArgument("picard_tol must be positive");
    if (picard_max_iter < 2) throw InvalidArgument("picard_max_iter must be at least 2");
    if (output_every < 1) throw InvalidArgument("output_every must be at least 1");
    if (checkpoint_every < 0) throw InvalidArgument("checkpoint_every must be nonnegative");
    if (!(dt_floor > 0.0)) throw InvalidArgument("dt_floor must be positive");
    if (!(initial.amplitude >= 0.0)) throw InvalidArgument("amplitude must be nonnegative");
    if (!(initial.tau_fraction >= 0.0 && initial.tau_fraction <= 1.0)) {
      throw InvalidArgument("tau_fraction must lie in [0, 1]");
    }
    if (initial.kind == InitialKind::single_mode && initial.mode.size() != static_cast<std::size_t>(grid.dim)) {
      throw InvalidArgument("initial_condition.mode needs one entry per dimension");
    }
    if (initial.kind == InitialKind::from_checkpoint && initial.checkpoint.empty()) {
      throw InvalidArgument("from_checkpoint needs initial_condition.checkpoint");
    }
    if (!(cfl_safety > 0.0)) throw InvalidArgument("cfl_safety must be positive");
    if (!(energy.big_c_floor > 0.0)) throw InvalidArgument("big_c_floor must be positive");
    if (!(energy.budget_rtol >= 0.0)) throw InvalidArgument("budget_rtol must be nonnegative");
    if (!(adaptive.grow > 1.0) || adaptive.clean_steps < 1) throw InvalidArgument("invalid adaptive_dt settings");
    (void)resolved_constants();
  }
};

namespace detail {

inline const char* kind_name(InitialKind k) {
  switch (k) {
    case InitialKind::taylor_green:
      return "taylor_green";
    case InitialKind::random_smooth:
      return "random_smooth";
    case InitialKind::single_mode:
      return "single_mode";
    case InitialKind::from_checkpoint:
      return "from_checkpoint";
  }
  return "taylor_green";
}

inline InitialKind parse_kind(const std::string& s) {
  if (s == "taylor_green") return InitialKind::taylor_green;
  if (s == "random_smooth") return InitialKind::random_smooth;
  if (s == "single_mode") return InitialKind::single_mode;
  if (s == "from_checkpoint") return InitialKind::from_checkpoint;
  throw InvalidArgument("unknown initial_condition.kind '" + s + "'");
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be a JSON object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw InvalidArgument("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json to_json(const SolverConfig& c) {
  using nlohmann::json;
  json j;
  j["grid"] = {{"dim", c.grid.dim}, {"n", c.grid.n}, {"box_length", c.grid.box_length}, {"dealias", c.grid.dealias}};
  j["params"] = {{"re", c.params.re}, {"we", c.params.we}, {"alpha", c.params.alpha}, {"a", c.params.a}};
  j["dt"] = c.dt;
  j["t_end"] = c.t_end;
  j["picard_tol"] = c.picard_tol;
  j["picard_max_iter"] = c.picard_max_iter;
  j["output_every"] = c.output_every;
  j["checkpoint_every"] = c.checkpoint_every;
  j["seed"] = c.seed;
  j["dt_floor"] = c.dt_floor;
  j["initial_condition"] = {{"kind", detail::kind_name(c.initial.kind)},
                            {"amplitude", c.initial.amplitude},
                            {"tau_fraction", c.initial.tau_fraction},
                            {"mode", c.initial.mode},
                            {"cutoff", c.initial.cutoff},
                            {"checkpoint", c.initial.checkpoint}};
  const auto& e = c.energy;
  j["energy"] = {{"kappa", e.constants.kappa},
                 {"c0", e.constants.c0},
                 {"big_c", e.constants.big_c},
                 {"m1", e.constants.m1},
                 {"delta0", c.resolved_constants().delta0},
                 {"big_c_floor", e.big_c_floor},
                 {"budget_rtol", e.budget_rtol},
                 {"calibration_amplitudes", e.calibration_amplitudes}};
  j["transport"] = {{"cfl_safety", c.cfl_safety}, {"cfl_policy", c.cfl_policy == CflPolicy::error ? "error" : "warn"}};
  j["adaptive_dt"] = {{"enabled", c.adaptive.enabled}, {"grow", c.adaptive.grow}, {"clean_steps", c.adaptive.clean_steps}};
  j["sweep"] = {{"alpha", c.sweep.alpha}, {"amplitude", c.sweep.amplitude}};
  return j;
}

/// Parses a config document; missing keys keep their defaults, unknown keys are rejected.
inline SolverConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  SolverConfig c;
  try {
    detail::reject_unknown(j,
                           {"grid", "params", "dt", "t_end", "picard_tol", "picard_max_iter", "output_every",
                            "checkpoint_every", "seed", "dt_floor", "initial_condition", "energy", "transport",
                            "adaptive_dt", "sweep"},
                           "config");
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      detail::reject_unknown(g, {"dim", "n", "box_length", "dealias"}, "grid");
      read(g, "dim", c.grid.dim);
      const auto d = static_cast<std::size_t>(c.grid.dim);
      if (g.contains("n")) {
        if (g["n"].is_number()) {
          c.grid.n.assign(d, g["n"].get<int>());
        } else {
          c.grid.n = g["n"].get<std::vector<int>>();
        }
      } else {
        c.grid.n.resize(d, c.grid.n.front());
      }
      if (g.contains("box_length")) {
        if (g["box_length"].is_number()) {
          c.grid.box_length.assign(d, g["box_length"].get<double>());
        } else {
          c.grid.box_length = g["box_length"].get<std::vector<double>>();
        }
      } else {
        c.grid.box_length.assign(d, 2.0 * std::numbers::pi);
      }
      read(g, "dealias", c.grid.dealias);
    }
    if (j.contains("params")) {
      const auto& p = j["params"];
      detail::reject_unknown(p, {"re", "we", "alpha", "a", "lambda1", "lambda2"}, "params");
      read(p, "re", c.params.re);
      read(p, "we", c.params.we);
      read(p, "a", c.params.a);
      const bool has_lambdas = p.contains("lambda1") || p.contains("lambda2");
      if (has_lambdas && p.contains("alpha")) throw InvalidArgument("give either alpha or lambda1/lambda2, not both");
      if (has_lambdas) {
        c.params.alpha = derive_alpha(p.at("lambda1").get<double>(), p.at("lambda2").get<double>());
      } else {
        read(p, "alpha", c.params.alpha);
      }
    }
    read(j, "dt", c.dt);
    read(j, "t_end", c.t_end);
    read(j, "picard_tol", c.picard_tol);
    read(j, "picard_max_iter", c.picard_max_iter);
    read(j, "output_every", c.output_every);
    read(j, "checkpoint_every", c.checkpoint_every);
    read(j, "seed", c.seed);
    read(j, "dt_floor", c.dt_floor);
    if (j.contains("initial_condition")) {
      const auto& ic = j["initial_condition"];
      detail::reject_unknown(ic, {"kind", "amplitude", "tau_fraction", "mode", "cutoff", "checkpoint"},
                             "initial_condition");
      if (ic.contains("kind")) c.initial.kind = detail::parse_kind(ic["kind"].get<std::string>());
      read(ic, "amplitude", c.initial.amplitude);
      read(ic, "tau_fraction", c.initial.tau_fraction);
      read(ic, "mode", c.initial.mode);
      read(ic, "cutoff", c.initial.cutoff);
      read(ic, "checkpoint", c.initial.checkpoint);
    }
    if (c.initial.mode.size() != static_cast<std::size_t>(c.grid.dim) && c.initial.kind != InitialKind::single_mode) {
      c.initial.mode.assign(static_cast<std::size_t>(c.grid.dim), 0);
      c.initial.mode[0] = 1;
    }
    if (j.contains("energy")) {
      const auto& e = j["energy"];
      detail::reject_unknown(e,
                             {"kappa", "c0", "big_c", "m1", "delta0", "big_c_floor", "budget_rtol",
                              "calibration_amplitudes"},
                             "energy");
      if (e.contains("kappa")) {
        const auto k = e["kappa"].get<std::vector<double>>();
        if (k.size() != 6) throw InvalidArgument("energy.kappa needs six entries");
        std::copy(k.begin(), k.end(), c.energy.constants.kappa.begin());
      }
      read(e, "c0", c.energy.constants.c0);
      read(e, "big_c", c.energy.constants.big_c);
      read(e, "m1", c.energy.constants.m1);
      read(e, "delta0", c.energy.constants.delta0);
      read(e, "big_c_floor", c.energy.big_c_floor);
      read(e, "budget_rtol", c.energy.budget_rtol);
      read(e, "calibration_amplitudes", c.energy.calibration_amplitudes);
    }
    if (j.contains("transport")) {
      const auto& t = j["transport"];
      detail::reject_unknown(t, {"cfl_safety", "cfl_policy"}, "transport");
      read(t, "cfl_safety", c.cfl_safety);
      if (t.contains("cfl_policy")) {
        const auto s = t["cfl_policy"].get<std::string>();
        if (s == "error") {
          c.cfl_policy = CflPolicy::error;
        } else if (s == "warn") {
          c.cfl_policy = CflPolicy::warn;
        } else {
          throw InvalidArgument("transport.cfl_policy must be 'error' or 'warn'");
        }
      }
    }
    if (j.contains("adaptive_dt")) {
      const auto& a = j["adaptive_dt"];
      detail::reject_unknown(a, {"enabled", "grow", "clean_steps"}, "adaptive_dt");
      read(a, "enabled", c.adaptive.enabled);
      read(a, "grow", c.adaptive.grow);
      read(a, "clean_steps", c.adaptive.clean_steps);
    }
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      detail::reject_unknown(s, {"alpha", "amplitude"}, "sweep");
      read(s, "alpha", c.sweep.alpha);
      read(s, "amplitude", c.sweep.amplitude);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

inline SolverConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("cannot parse " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace oldroyd
