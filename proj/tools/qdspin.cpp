// Command line front end: run experiments, reproduce standard figures,
// validate configs. Every output embeds the fully resolved config and seed.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qdspin/config.hpp"
#include "qdspin/dynamics.hpp"
#include "qdspin/errors.hpp"
#include "qdspin/experiments.hpp"
#include "qdspin/fitting.hpp"
#include "qdspin/io.hpp"
#include "qdspin/svg.hpp"
#include "qdspin/units.hpp"

namespace fs = std::filesystem;
using namespace qdspin;
using experiments::Direction;
using experiments::Engine;
using experiments::ExperimentConfig;
using experiments::Kind;
using experiments::Species;
using experiments::SweepResult;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitFit = 3;

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<long> shots;
  std::optional<int> threads;
  std::optional<bool> plot;
  std::optional<std::string> species;
  std::optional<std::string> direction;
  bool require_fit = false;
};

config::RunConfig load_config(const CliOptions& opt) {
  config::RunConfig cfg = opt.config_path.empty()
                              ? config::RunConfig::defaults()
                              : config::RunConfig::from_toml_file(opt.config_path);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.out_dir) cfg.output.directory = *opt.out_dir;
  if (opt.shots) cfg.readout.shots_per_point = *opt.shots;
  if (opt.threads) cfg.threads = *opt.threads;
  if (opt.plot) cfg.output.plot = *opt.plot;
  if (opt.species) cfg.experiment.charge_species = *opt.species;
  if (opt.direction) cfg.experiment.scan_direction = *opt.direction;
  const auto problems = cfg.validate();
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return cfg;
}

bool fit_ok(const fitting::FitResult& fit) { return fit.converged; }

// T1 decays toward the mixed-state baseline, so the plain decay fitters do
// not apply; fit amplitude + offset + time constant directly.
fitting::FitResult fit_exponential_with_offset(const std::vector<double>& t,
                                               const std::vector<double>& y) {
  const double y0 = y.front();
  const double yend = y.back();
  fitting::ModelFn model = [](double x, const std::vector<double>& p) {
    return p[2] + p[0] * std::exp(-x / p[1]);
  };
  const double tmax = *std::max_element(t.begin(), t.end());
  auto fit = fitting::levenberg_fit(model, {"a0", "t1", "offset"},
                                    {y0 - yend, 0.3 * tmax, yend}, t, y);
  fit.model = "exponential_offset";
  fit.parameters["t1"] = std::abs(fit.parameters["t1"]);
  return fit;
}

void maybe_plot_1d(const config::RunConfig& cfg, const SweepResult& result,
                   const std::string& stem) {
  if (!cfg.output.plot || result.axes.size() != 1) return;
  std::vector<svg::LineSeries> series;
  for (const auto& s : result.series)
    series.push_back({s.direction, result.axes[0].values, s.mean_counts});
  const std::string path = cfg.output.directory + "/" + stem + ".svg";
  io::write_text(path, svg::line_plot(experiments::to_string(result.kind),
                                      result.axes[0].name, "mean counts per shot", series,
                                      result.manifest.dump()));
}

void maybe_plot_2d(const config::RunConfig& cfg, const SweepResult& result,
                   const std::string& stem) {
  if (!cfg.output.plot || result.axes.size() != 2) return;
  const std::string path = cfg.output.directory + "/" + stem + ".svg";
  // row-major (axis0, axis1) -> heatmap rows over axis0
  io::write_text(path, svg::heatmap(experiments::to_string(result.kind), result.axes[1].name,
                                    result.axes[0].name, result.axes[1].values,
                                    result.axes[0].values, result.series[0].mean_counts,
                                    result.manifest.dump()));
}

// per-point standard errors carry the shot budget; fits weight by 1/se^2
std::vector<double> fit_weights(const experiments::Series& s) {
  std::vector<double> w;
  w.reserve(s.std_err.size());
  bool usable = !s.std_err.empty();
  for (double se : s.std_err) {
    if (se <= 0.0) usable = false;
    w.push_back(se > 0.0 ? 1.0 / (se * se) : 0.0);
  }
  if (!usable) w.clear();
  return w;
}

// fits and derived quantities per experiment kind
int attach_analysis(const Engine& eng, const SweepResult& result, nlohmann::json& report,
                    bool require_fit) {
  bool fits_converged = true;
  const auto kind = result.kind;

  if (kind == Kind::Ramsey || kind == Kind::EchoFine) {
    const auto fit = fitting::fit_sinusoid(result.axes[0].values, result.series[0].mean_counts,
                                           fit_weights(result.series[0]));
    report["fits"]["sinusoid"] = io::fit_to_json(fit);
    fits_converged &= fit_ok(fit);
    if (fit_ok(fit) && fit.at("offset") > 0.0) {
      const double vis = std::clamp(fit.at("amplitude") / fit.at("offset"), 0.0, 1.0);
      report["derived"]["visibility"] = vis;
      report["derived"]["pulse_fidelity"] = fitting::fidelity_from_visibility(vis);
      report["derived"]["larmor_frequency_ghz"] = fit.at("frequency") / 1e9;
    }
  } else if (kind == Kind::EchoDecay) {
    const auto sel =
        fitting::select_envelope_model(result.axes[0].values, result.series[0].mean_counts);
    report["fits"]["exponential"] = io::fit_to_json(sel.exponential);
    report["fits"]["gaussian"] = io::fit_to_json(sel.gaussian);
    report["derived"]["envelope_model"] = sel.model;
    report["derived"]["rss_ratio_gauss_over_exp"] = sel.rss_ratio;
    fits_converged &= sel.exponential.converged;
    if (sel.exponential.converged) {
      const double t2 = sel.exponential.at("t2");
      const double op_s = 20e-12;
      report["derived"]["t2_us"] = t2 / units::kUs;
      report["derived"]["pi_pulse_duration_ps"] = eng.pi_pulse_duration() / units::kPs;
      report["derived"]["ops_per_coherence"] = t2 / op_s;
      report["derived"]["ops_per_coherence_ok"] =
          eng.pi_pulse_duration() <= op_s && t2 / op_s >= 5e4;
    }
  } else if (kind == Kind::PumpScan) {
    for (const auto& s : result.series) {
      const auto fit =
          fitting::fit_gaussian_profile(result.axes[0].values, s.mean_counts, fit_weights(s));
      report["fits"]["gaussian_profile_" + s.direction] = io::fit_to_json(fit);
      if (fit_ok(fit)) {
        report["derived"]["fwhm_ghz_" + s.direction] = fit.at("fwhm") / 1e9;
      }
      fits_converged &= fit_ok(fit);
    }
    if (result.series.size() == 2) {
      const auto rep = experiments::hysteresis_metric(result);
      report["derived"]["hysteresis_metric"] = rep.metric;
      report["derived"]["hysteresis_threshold"] = rep.threshold;
      report["flags"]["hysteresis"] = rep.detected;
    }
  } else if (kind == Kind::HysteresisRamsey) {
    for (const auto& s : result.series) {
      const auto fit = fitting::fit_sinusoid(result.axes[0].values, s.mean_counts, fit_weights(s));
      report["fits"]["sinusoid_" + s.direction] = io::fit_to_json(fit);
      fits_converged &= fit_ok(fit);
    }
    if (result.series.size() == 2) {
      const auto rep = experiments::hysteresis_metric(result);
      report["derived"]["hysteresis_metric"] = rep.metric;
      report["derived"]["hysteresis_threshold"] = rep.threshold;
      report["flags"]["hysteresis"] = rep.detected;
    }
  } else if (kind == Kind::T1) {
    const auto fit = fit_exponential_with_offset(result.axes[0].values,
                                                 result.series[0].mean_counts);
    report["fits"]["exponential_offset"] = io::fit_to_json(fit);
    fits_converged &= fit_ok(fit);
    if (fit_ok(fit)) report["derived"]["t1_s"] = fit.at("t1");
  } else if (kind == Kind::Rabi) {
    // first-oscillation visibility from the raw sweep
    const auto& m = result.series[0].mean_counts;
    double mx = 0.0;
    std::size_t imax = 0;
    for (std::size_t i = 0; i + 1 < m.size(); ++i) {
      if (m[i] > mx) {
        mx = m[i];
        imax = i;
      }
      if (i > 2 && m[i] < m[i - 1] && mx > 0.0) break;
    }
    double mn = mx;
    for (std::size_t i = 0; i <= imax; ++i) mn = std::min(mn, m[i]);
    if (mx + mn > 0.0) report["derived"]["first_oscillation_visibility"] = (mx - mn) / (mx + mn);
  }

  if (require_fit && !fits_converged) return kExitFit;
  return kExitOk;
}

int write_outputs(const Engine& eng, const config::RunConfig& cfg, const SweepResult& result,
                  bool require_fit, const std::string& stem_override = "") {
  fs::create_directories(cfg.output.directory);
  const std::string stem = stem_override.empty() ? io::artifact_stem(result) : stem_override;
  io::write_text(cfg.output.directory + "/" + stem + ".csv", io::sweep_to_csv(result));

  nlohmann::json report = io::report_skeleton(result);
  const int fit_status = attach_analysis(eng, result, report, require_fit);
  io::write_text(cfg.output.directory + "/" + stem + ".report.json", report.dump(2) + "\n");

  maybe_plot_1d(cfg, result, stem);
  maybe_plot_2d(cfg, result, stem);
  std::cout << cfg.output.directory + "/" + stem + ".csv" << "\n";
  return fit_status;
}

int cmd_run(const CliOptions& opt, const std::string& kind_name) {
  const config::RunConfig cfg = load_config(opt);
  const Kind kind = experiments::kind_from_string(kind_name);
  Engine eng(cfg);
  const SweepResult result = eng.run(eng.experiment_config(kind));
  return write_outputs(eng, cfg, result, opt.require_fit);
}

std::vector<double> linspace(double a, double b, long n) {
  std::vector<double> v(n);
  for (long i = 0; i < n; ++i)
    v[i] = n > 1 ? a + (b - a) * static_cast<double>(i) / (n - 1) : a;
  return v;
}

int reproduce_envelope(const CliOptions& opt, config::RunConfig cfg) {
  // fringe amplitude versus delay plus both decay-model fits
  Engine eng(cfg);
  ExperimentConfig ec = eng.experiment_config(Kind::Ramsey);
  ec.batch_size = 1;  // one quasi-static draw per shot
  std::vector<double> centers;
  for (int i = 1; i <= 20; ++i) centers.push_back(0.25e-9 * i);
  const auto env = eng.ramsey_envelope(centers, ec);

  std::vector<double> ts, amps, sigmas;
  for (const auto& p : env) {
    ts.push_back(p.tau);
    amps.push_back(p.amplitude);
    sigmas.push_back(p.sigma);
  }
  const auto sel = fitting::select_envelope_model(ts, amps);

  std::string csv = "# qdspin sweep\n# manifest: " + eng.manifest(ec).dump() + "\n";
  csv += "tau_s,direction,fringe_amplitude,shots,std_err\n";
  for (std::size_t i = 0; i < ts.size(); ++i) {
    char line[160];
    std::snprintf(line, sizeof(line), "%.17g,up,%.17g,%ld,%.17g\n", ts[i], amps[i],
                  ec.shots_per_point, sigmas[i]);
    csv += line;
  }
  fs::create_directories(cfg.output.directory);
  const std::string stem = "fid_envelope_" + std::to_string(cfg.seed);
  io::write_text(cfg.output.directory + "/" + stem + ".csv", csv);

  nlohmann::json report = {{"schema", 1},
                           {"kind", "fid_envelope"},
                           {"manifest", eng.manifest(ec)},
                           {"fits",
                            {{"gaussian", io::fit_to_json(sel.gaussian)},
                             {"exponential", io::fit_to_json(sel.exponential)}}},
                           {"flags", nlohmann::json::object()},
                           {"derived",
                            {{"envelope_model", sel.model},
                             {"rss_ratio_gauss_over_exp", sel.rss_ratio},
                             {"t2_star_ns", sel.gaussian.converged
                                                ? sel.gaussian.at("t2star") / units::kNs
                                                : 0.0}}}};
  io::write_text(cfg.output.directory + "/" + stem + ".report.json", report.dump(2) + "\n");
  if (cfg.output.plot) {
    io::write_text(cfg.output.directory + "/" + stem + ".svg",
                   svg::line_plot("fid envelope", "tau_s", "fringe amplitude",
                                  {{"amplitude", ts, amps}}, eng.manifest(ec).dump()));
  }
  std::cout << cfg.output.directory + "/" + stem + ".csv" << "\n";
  if (opt.require_fit && !(sel.gaussian.converged && sel.exponential.converged))
    return kExitFit;
  return kExitOk;
}

int reproduce_bias_fringes(const CliOptions& opt, config::RunConfig cfg) {
  // long-delay fringes at two bias points; anti-phase near T2*
  int status = kExitOk;
  nlohmann::json phases = nlohmann::json::object();
  fs::create_directories(cfg.output.directory);
  Engine eng(cfg);

  for (double bias : {1.55, 1.65}) {
    ExperimentConfig ec = eng.experiment_config(Kind::Ramsey);
    ec.bias_v = bias;
    ec.sweep = {{"tau_s", linspace(2.0e-9, 2.6e-9, 241)}};
    const SweepResult r = eng.run(ec);
    char tag[32];
    std::snprintf(tag, sizeof(tag), "bias_%.2fv", bias);
    const std::string stem =
        "ramsey_" + std::string(tag) + "_" + std::to_string(cfg.seed);
    io::write_text(cfg.output.directory + "/" + stem + ".csv", io::sweep_to_csv(r));
    const auto fit = fitting::fit_sinusoid(r.axes[0].values, r.series[0].mean_counts);
    if (!fit.converged && opt.require_fit) status = kExitFit;
    phases[tag] = io::fit_to_json(fit);
    std::cout << cfg.output.directory + "/" + stem + ".csv" << "\n";
  }

  const double f1 = phases["bias_1.55v"]["parameters"]["frequency"].get<double>();
  const double p1 = phases["bias_1.55v"]["parameters"]["phase"].get<double>();
  const double f2 = phases["bias_1.65v"]["parameters"]["frequency"].get<double>();
  const double p2 = phases["bias_1.65v"]["parameters"]["phase"].get<double>();
  const double tau_star = 2.3e-9;
  const double dphi = std::remainder(units::kTwoPi * (f2 - f1) * tau_star + (p2 - p1),
                                     units::kTwoPi);
  nlohmann::json report = {{"schema", 1},
                           {"kind", "bias_fringes"},
                           {"manifest", eng.manifest(eng.experiment_config(Kind::Ramsey))},
                           {"fits", phases},
                           {"flags", nlohmann::json::object()},
                           {"derived",
                            {{"phase_difference_at_tau_star_rad", dphi},
                             {"tau_star_s", tau_star},
                             {"anti_phase", std::abs(std::abs(dphi) - std::numbers::pi) < 0.3}}}};
  const std::string stem = "bias_fringes_" + std::to_string(cfg.seed);
  io::write_text(cfg.output.directory + "/" + stem + ".report.json", report.dump(2) + "\n");
  return status;
}

int reproduce_larmor_vs_bias(const CliOptions& opt, config::RunConfig cfg) {
  fs::create_directories(cfg.output.directory);
  Engine eng(cfg);
  std::vector<double> biases = linspace(1.50, 1.70, 9);
  std::vector<double> freqs;
  bool all_converged = true;

  for (double bias : biases) {
    ExperimentConfig ec = eng.experiment_config(Kind::Ramsey);
    ec.bias_v = bias;
    const SweepResult r = eng.run(ec);
    const auto fit = fitting::fit_sinusoid(r.axes[0].values, r.series[0].mean_counts);
    all_converged &= fit.converged;
    freqs.push_back(fit.converged ? fit.at("frequency") : 0.0);
  }

  bool monotone = true;
  for (std::size_t i = 1; i < freqs.size(); ++i) monotone &= freqs[i] > freqs[i - 1];

  std::string csv = "# qdspin sweep\n# manifest: " +
                    eng.manifest(eng.experiment_config(Kind::Ramsey)).dump() + "\n";
  csv += "bias_v,direction,larmor_frequency_hz,shots,std_err\n";
  for (std::size_t i = 0; i < biases.size(); ++i) {
    char line[120];
    std::snprintf(line, sizeof(line), "%.17g,up,%.17g,%ld,0\n", biases[i], freqs[i],
                  cfg.readout.shots_per_point);
    csv += line;
  }
  const std::string stem = "larmor_vs_bias_" + std::to_string(cfg.seed);
  io::write_text(cfg.output.directory + "/" + stem + ".csv", csv);
  nlohmann::json report = {{"schema", 1},
                           {"kind", "larmor_vs_bias"},
                           {"manifest", eng.manifest(eng.experiment_config(Kind::Ramsey))},
                           {"fits", nlohmann::json::object()},
                           {"flags", {{"monotone", monotone}}},
                           {"derived",
                            {{"bias_v", biases}, {"larmor_frequency_hz", freqs}}}};
  io::write_text(cfg.output.directory + "/" + stem + ".report.json", report.dump(2) + "\n");
  if (cfg.output.plot) {
    io::write_text(cfg.output.directory + "/" + stem + ".svg",
                   svg::line_plot("larmor frequency vs bias", "bias_v", "frequency_hz",
                                  {{"omega_L", biases, freqs}}));
  }
  std::cout << cfg.output.directory + "/" + stem + ".csv" << "\n";
  if (opt.require_fit && !all_converged) return kExitFit;
  return kExitOk;
}

int cmd_reproduce(const CliOptions& opt, const std::string& figure) {
  config::RunConfig cfg = load_config(opt);

  auto run_kind = [&](Kind kind, const std::string& species,
                      std::optional<std::vector<double>> ramsey_taus =
                          std::nullopt) -> int {
    if (!opt.species) cfg.experiment.charge_species = species;
    Engine eng(cfg);
    ExperimentConfig ec = eng.experiment_config(kind);
    if (ramsey_taus) ec.sweep = {{"tau_s", *ramsey_taus}};
    const SweepResult result = eng.run(ec);
    const std::string stem = "fig" + figure + "_" + experiments::to_string(kind) + "_" +
                             std::to_string(cfg.seed);
    return write_outputs(eng, cfg, result, opt.require_fit, stem);
  };

  if (figure == "2C") return run_kind(Kind::Rabi, "hole");
  if (figure == "2D") return run_kind(Kind::Ramsey, "hole");
  if (figure == "2E") return run_kind(Kind::BlochMap, "hole");
  if (figure == "3A") return run_kind(Kind::HysteresisRamsey, "electron");
  if (figure == "3B") return run_kind(Kind::HysteresisRamsey, "hole");
  if (figure == "3C") return run_kind(Kind::PumpScan, "electron");
  if (figure == "3D") return run_kind(Kind::PumpScan, "hole");
  if (figure == "4A") return run_kind(Kind::Ramsey, "hole", linspace(0.0, 5e-9, 1001));
  if (figure == "4B") return reproduce_envelope(opt, cfg);
  if (figure == "4C") return reproduce_bias_fringes(opt, cfg);
  if (figure == "4D") return reproduce_larmor_vs_bias(opt, cfg);
  if (figure == "4E") return run_kind(Kind::EchoFine, "hole");
  if (figure == "4F") return run_kind(Kind::EchoDecay, "hole");
  throw DomainError("unknown figure: " + figure +
                    " (expected 2C,2D,2E,3A,3B,3C,3D,4A,4B,4C,4D,4E,4F)");
}

int cmd_validate(const CliOptions& opt, const std::string& trajectory_csv) {
  const config::RunConfig cfg = load_config(opt);
  std::cout << "resolved configuration:\n" << cfg.to_json().dump(2) << "\n";

  Engine eng(cfg);
  const auto hw = eng.hardware();
  bool clean = true;
  for (const auto& [name, seq] :
       {std::pair{"ramsey", pulses::make_ramsey(hw, 100e-12)},
        std::pair{"rabi", pulses::make_rabi(hw, eng.pi_power())},
        std::pair{"echo", pulses::make_echo(hw, 130e-9, 10e-12)},
        std::pair{"bloch_map", pulses::make_bloch_map(hw, 1.0, 50e-12)},
        std::pair{"pump_scan", pulses::make_pump_scan(hw, 0.0)}}) {
    for (const auto& v : pulses::validate(seq)) {
      std::cerr << "sequence '" << name << "': " << v.code << ": " << v.message << "\n";
      clean = false;
    }
  }

  // one-point smoke evolution
  const auto sys = cfg.spin_system();
  dynamics::EvolveOptions opts;
  opts.keep_trajectory = !trajectory_csv.empty();
  auto traj = dynamics::evolve(
      dynamics::DensityMatrix::ground_down(),
      [&](double) {
        return levels::build_hamiltonian(sys, cfg.selection_rules(), {0.0, 0.0});
      },
      dynamics::radiative_terms(sys), 0.0, 1e-9, opts);
  if (traj.final.trace_error() > 1e-9) {
    std::cerr << "smoke evolution failed the trace check\n";
    clean = false;
  }
  if (!trajectory_csv.empty()) io::write_text(trajectory_csv, io::trajectory_to_csv(traj));

  std::cout << (clean ? "ok\n" : "validation failed\n");
  return clean ? kExitOk : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum-dot spin qubit simulator"};
  app.require_subcommand(1);

  CliOptions opt;
  app.add_option("--config", opt.config_path, "TOML config file");
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "TOML config file");
    sub->add_option("--seed", opt.seed, "run seed");
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--shots", opt.shots, "shots per sweep point");
    sub->add_option("--threads", opt.threads, "worker threads for non-feedback sweeps");
    sub->add_flag("--plot,!--no-plot", opt.plot, "emit SVG plots");
    sub->add_option("--species", opt.species, "hole | electron")
        ->check(CLI::IsMember({"hole", "electron"}));
    sub->add_option("--direction", opt.direction, "up | down | both")
        ->check(CLI::IsMember({"up", "down", "both"}));
    sub->add_flag("--require-fit", opt.require_fit, "exit 3 when a fit does not converge");
  };

  std::string kind_name, figure;
  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("kind", kind_name,
                  "rabi | ramsey | bloch-map | echo-fine | echo-decay | pump-scan | "
                  "hysteresis-ramsey | t1")
      ->required();
  add_common(run);

  auto* repro = app.add_subcommand("reproduce", "run a standard figure preset");
  repro->add_option("figure", figure, "2C 2D 2E 3A 3B 3C 3D 4A 4B 4C 4D 4E 4F")->required();
  add_common(repro);

  std::string trajectory_csv;
  auto* validate = app.add_subcommand("validate", "check config, sequences and a smoke run");
  validate->add_option("--trajectory-csv", trajectory_csv,
                       "debug: dump the smoke-evolution trajectory to CSV");
  add_common(validate);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(opt, kind_name);
    if (repro->parsed()) return cmd_reproduce(opt, figure);
    if (validate->parsed()) return cmd_validate(opt, trajectory_csv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dynamics::IntegrationError& e) {
    std::cerr << "integration error: " << e.what() << " (t=" << e.t_reached << ")\n";
    return kExitRuntime;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
