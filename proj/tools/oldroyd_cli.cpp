#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "oldroyd/oldroyd.hpp"

namespace fs = std::filesystem;
using namespace oldroyd;

namespace {

struct Common {
  std::string config;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt_floor;
  bool emit_pressure = false;
};

void add_common(CLI::App* app, Common& c, bool needs_output) {
  app->add_option("--config", c.config, "JSON config file")->required()->check(CLI::ExistingFile);
  auto* out = app->add_option("--output-dir", c.output_dir, "directory for run artifacts");
  if (needs_output) out->required();
  app->add_option("--seed", c.seed, "override the random seed");
  app->add_option("--dt-floor", c.dt_floor, "smallest substep allowed when halving");
}

SolverConfig load(const Common& c) {
  auto cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.dt_floor) cfg.dt_floor = *c.dt_floor;
  cfg.validate();
  return cfg;
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-spectral Oldroyd-B solver with energy certificate monitoring"};
  app.require_subcommand(1);

  Common run_opts, norm_opts, cert_opts, cal_opts, sweep_opts;
  auto* run_cmd = app.add_subcommand("run", "advance a config to t_end and write the time series");
  add_common(run_cmd, run_opts, true);
  run_cmd->add_flag("--emit-pressure", run_opts.emit_pressure, "write pressure-gradient diagnostics");

  auto* norm_cmd = app.add_subcommand("normalize", "print the fully resolved config");
  add_common(norm_cmd, norm_opts, false);

  std::string csv;
  auto* cert_cmd = app.add_subcommand("certify", "check a recorded time series against the config's constants");
  add_common(cert_cmd, cert_opts, false);
  cert_cmd->add_option("--csv", csv, "time series (default: <output-dir>/series.csv)");

  auto* cal_cmd = app.add_subcommand("calibrate", "estimate C, M1 and delta0 from bracketing runs");
  add_common(cal_cmd, cal_opts, false);

  auto* sweep_cmd = app.add_subcommand("sweep", "run every (alpha, amplitude) point of the sweep section");
  add_common(sweep_cmd, sweep_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run_cmd->parsed()) {
      const auto cfg = load(run_opts);
      const auto r = run(cfg, RunOptions{run_opts.output_dir, run_opts.emit_pressure, &std::cerr});
      print(r.summary);
      return r.exit_code;
    }
    if (norm_cmd->parsed()) {
      const auto j = to_json(load(norm_opts));
      if (!norm_opts.output_dir.empty()) {
        fs::create_directories(norm_opts.output_dir);
        detail::write_json(fs::path(norm_opts.output_dir) / "config.json", j);
      }
      print(j);
      return kExitOk;
    }
    if (cert_cmd->parsed()) {
      const auto cfg = load(cert_opts);
      fs::path path = csv;
      if (path.empty()) {
        if (cert_opts.output_dir.empty()) throw InvalidArgument("certify needs --csv or --output-dir");
        path = fs::path(cert_opts.output_dir) / "series.csv";
      }
      const auto rows = read_series(path);
      const auto result = certify_series(rows, cfg.resolved_constants(), cfg.energy.budget_rtol);
      if (!cert_opts.output_dir.empty()) {
        fs::create_directories(cert_opts.output_dir);
        detail::write_json(fs::path(cert_opts.output_dir) / "certificate.json", result.verdict);
      }
      print(result.verdict);
      return kExitOk;
    }
    if (cal_cmd->parsed()) {
      const auto cfg = load(cal_opts);
      const auto cal = calibrate(cfg, &std::cerr);
      nlohmann::json j = cal.to_json();
      j["config"] = to_json(with_calibration(cfg, cal));
      if (!cal_opts.output_dir.empty()) {
        fs::create_directories(cal_opts.output_dir);
        detail::write_json(fs::path(cal_opts.output_dir) / "calibration.json", cal.to_json());
        detail::write_json(fs::path(cal_opts.output_dir) / "calibrated_config.json", j["config"]);
      }
      print(j);
      return kExitOk;
    }
    if (sweep_cmd->parsed()) {
      const auto cfg = load(sweep_opts);
      const auto summary = run_sweep(cfg, sweep_opts.output_dir, &std::cerr);
      print(summary);
      return summary["exit_code"].get<int>();
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
