#include "qdspin/config.hpp"

#include <cmath>
#include <set>

#include "qdspin/errors.hpp"
#include "qdspin/toml.hpp"
#include "qdspin/units.hpp"

namespace qdspin::config {

using units::kTwoPi;

RunConfig RunConfig::defaults() {
  RunConfig c{};
  c.seed = 1;
  c.threads = 1;

  // g factors back-computed from the 8 T splittings 30.2 GHz (hole) and
  // 35 GHz (electron)
  c.system.b_field_t = 8.0;
  c.system.g_hole = units::hz_to_rad(30.2e9) * units::kHbar / (units::kBohrMagneton * 8.0);
  c.system.g_electron = units::hz_to_rad(35.0e9) * units::kHbar / (units::kBohrMagneton * 8.0);
  c.system.trion_frequency_hz = 3.2e14;
  c.system.gamma_sp_per_s = 1.0e9;
  c.system.branching_to_dark = 0.5;
  // 0.1 V accumulates a pi phase difference at 2.3 ns
  c.system.larmor_bias_slope_hz_per_v = 0.5 / (2.3e-9 * 0.1);
  c.system.bias_ref_v = 1.6;
  c.system.bias_v = 1.6;
  c.system.bias_min_v = 1.0;
  c.system.bias_max_v = 2.2;
  c.system.larmor_ref_hz = std::nullopt;

  c.pulse.fwhm_ps = 3.67;
  c.pulse.detuning_ghz = 340.0;
  c.pulse.omega_peak_hz = 4.5e11;
  c.pulse.pulse_error = 0.11;
  c.pulse.selection_imbalance = 0.0;
  c.pulse.ideal = false;
  c.pulse.shape = "gaussian";
  c.pulse.polarization = "sigma+";

  c.pump.window_ns = 26.0;
  // deep saturation: the power-broadened window stays efficient across the
  // spectrally diffusing line
  c.pump.rabi_hz = 1.0e9 * std::sqrt(1000.0) / kTwoPi;
  c.pump.scan_rabi_scale = 0.02;
  c.pump.pad_ns = 1.0;

  // sqrt(2)/T2* with T2* = 2.3 ns
  c.noise.sigma_quasistatic_hz = std::sqrt(2.0) / (2.3e-9) / kTwoPi;
  c.noise.gamma_phi_per_s = 1.0 / 1.1e-6;
  c.noise.t1_s = 100.0 * 1.1e-6;
  c.noise.optical_linewidth_fwhm_ghz = 6.7;
  c.noise.bias_mod_amplitude_v = 0.0;
  c.noise.bias_mod_frequency_hz = 0.0;

  c.feedback.enabled = true;
  c.feedback.gain = 2.0e8;
  c.feedback.kappa_hole = 30.0;
  c.feedback.kappa_electron = 1.0;
  c.feedback.relaxation_per_s = 0.005;
  c.feedback.bound_hz = 8.0e8;
  c.feedback.ramsey_target = 0.5;
  c.feedback.scan_target = 0.0;
  c.feedback.optical_coupling = 20.0;

  c.readout.efficiency = 1.0;
  c.readout.dark_rate = 0.001;
  c.readout.shots_per_point = 10000;
  c.readout.batch_size = 100;
  c.readout.shot_noise = true;

  c.experiment.scan_direction = "both";
  c.experiment.charge_species = "hole";
  c.experiment.dwell_s = 1.0;
  c.experiment.sweep_start = std::nullopt;
  c.experiment.sweep_stop = std::nullopt;
  c.experiment.sweep_points = std::nullopt;

  c.output.directory = ".";
  c.output.plot = false;
  return c;
}

namespace {

double as_double(const toml::Value& v, const std::string& where) {
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<long>(v)) return static_cast<double>(std::get<long>(v));
  throw ConfigError(where + ": expected a number");
}

long as_long(const toml::Value& v, const std::string& where) {
  if (std::holds_alternative<long>(v)) return std::get<long>(v);
  throw ConfigError(where + ": expected an integer");
}

bool as_bool(const toml::Value& v, const std::string& where) {
  if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
  throw ConfigError(where + ": expected true/false");
}

std::string as_string(const toml::Value& v, const std::string& where) {
  if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
  throw ConfigError(where + ": expected a string");
}

// Tracks which keys a table consumed so leftovers can be rejected.
struct TableReader {
  const toml::Table* table;
  std::string name;
  std::set<std::string> seen;

  bool has(const std::string& key) {
    if (!table) return false;
    return table->count(key) > 0;
  }
  template <typename F>
  void read(const std::string& key, F&& setter) {
    if (!has(key)) return;
    seen.insert(key);
    const std::string where = name + "." + key;
    setter(table->at(key), where);
  }
  void finish() const {
    if (!table) return;
    for (const auto& [key, _] : *table) {
      if (!seen.count(key))
        throw ConfigError("unknown key '" + key + "' in [" + (name.empty() ? "top level" : name) +
                          "]");
    }
  }
};

void apply_document(RunConfig& c, const toml::Document& doc) {
  const std::set<std::string> known_tables = {"",        "system",   "pulse",      "pump",
                                              "noise",   "feedback", "readout",    "experiment",
                                              "output"};
  for (const auto& [table_name, _] : doc) {
    if (!known_tables.count(table_name))
      throw ConfigError("unknown table [" + table_name + "]");
  }

  auto reader = [&doc](const std::string& name) {
    TableReader r;
    r.name = name;
    auto it = doc.find(name);
    r.table = it == doc.end() ? nullptr : &it->second;
    return r;
  };

  auto top = reader("");
  top.read("seed", [&](const toml::Value& v, const std::string& w) {
    c.seed = static_cast<std::uint64_t>(as_long(v, w));
  });
  top.read("threads", [&](const toml::Value& v, const std::string& w) {
    c.threads = static_cast<int>(as_long(v, w));
  });
  top.finish();

  auto sys = reader("system");
  sys.read("b_field_t", [&](auto& v, auto& w) { c.system.b_field_t = as_double(v, w); });
  sys.read("g_hole", [&](auto& v, auto& w) { c.system.g_hole = as_double(v, w); });
  sys.read("g_electron", [&](auto& v, auto& w) { c.system.g_electron = as_double(v, w); });
  sys.read("trion_frequency_hz",
           [&](auto& v, auto& w) { c.system.trion_frequency_hz = as_double(v, w); });
  sys.read("gamma_sp_per_s", [&](auto& v, auto& w) { c.system.gamma_sp_per_s = as_double(v, w); });
  sys.read("branching_to_dark",
           [&](auto& v, auto& w) { c.system.branching_to_dark = as_double(v, w); });
  sys.read("larmor_bias_slope_hz_per_v",
           [&](auto& v, auto& w) { c.system.larmor_bias_slope_hz_per_v = as_double(v, w); });
  sys.read("bias_ref_v", [&](auto& v, auto& w) { c.system.bias_ref_v = as_double(v, w); });
  sys.read("bias_v", [&](auto& v, auto& w) { c.system.bias_v = as_double(v, w); });
  sys.read("bias_min_v", [&](auto& v, auto& w) { c.system.bias_min_v = as_double(v, w); });
  sys.read("bias_max_v", [&](auto& v, auto& w) { c.system.bias_max_v = as_double(v, w); });
  sys.read("larmor_ref_hz", [&](auto& v, auto& w) { c.system.larmor_ref_hz = as_double(v, w); });
  sys.finish();

  auto pul = reader("pulse");
  pul.read("fwhm_ps", [&](auto& v, auto& w) { c.pulse.fwhm_ps = as_double(v, w); });
  pul.read("detuning_ghz", [&](auto& v, auto& w) { c.pulse.detuning_ghz = as_double(v, w); });
  pul.read("omega_peak_hz", [&](auto& v, auto& w) { c.pulse.omega_peak_hz = as_double(v, w); });
  pul.read("pulse_error", [&](auto& v, auto& w) { c.pulse.pulse_error = as_double(v, w); });
  pul.read("selection_imbalance",
           [&](auto& v, auto& w) { c.pulse.selection_imbalance = as_double(v, w); });
  pul.read("ideal", [&](auto& v, auto& w) { c.pulse.ideal = as_bool(v, w); });
  pul.read("shape", [&](auto& v, auto& w) { c.pulse.shape = as_string(v, w); });
  pul.read("polarization", [&](auto& v, auto& w) { c.pulse.polarization = as_string(v, w); });
  pul.finish();

  auto pum = reader("pump");
  pum.read("window_ns", [&](auto& v, auto& w) { c.pump.window_ns = as_double(v, w); });
  pum.read("rabi_hz", [&](auto& v, auto& w) { c.pump.rabi_hz = as_double(v, w); });
  pum.read("scan_rabi_scale", [&](auto& v, auto& w) { c.pump.scan_rabi_scale = as_double(v, w); });
  pum.read("pad_ns", [&](auto& v, auto& w) { c.pump.pad_ns = as_double(v, w); });
  pum.finish();

  auto noi = reader("noise");
  noi.read("sigma_quasistatic_hz",
           [&](auto& v, auto& w) { c.noise.sigma_quasistatic_hz = as_double(v, w); });
  noi.read("gamma_phi_per_s", [&](auto& v, auto& w) { c.noise.gamma_phi_per_s = as_double(v, w); });
  noi.read("t1_s", [&](auto& v, auto& w) { c.noise.t1_s = as_double(v, w); });
  noi.read("optical_linewidth_fwhm_ghz",
           [&](auto& v, auto& w) { c.noise.optical_linewidth_fwhm_ghz = as_double(v, w); });
  noi.read("bias_mod_amplitude_v",
           [&](auto& v, auto& w) { c.noise.bias_mod_amplitude_v = as_double(v, w); });
  noi.read("bias_mod_frequency_hz",
           [&](auto& v, auto& w) { c.noise.bias_mod_frequency_hz = as_double(v, w); });
  noi.finish();

  auto fb = reader("feedback");
  fb.read("enabled", [&](auto& v, auto& w) { c.feedback.enabled = as_bool(v, w); });
  fb.read("gain", [&](auto& v, auto& w) { c.feedback.gain = as_double(v, w); });
  fb.read("kappa_hole", [&](auto& v, auto& w) { c.feedback.kappa_hole = as_double(v, w); });
  fb.read("kappa_electron",
          [&](auto& v, auto& w) { c.feedback.kappa_electron = as_double(v, w); });
  fb.read("relaxation_per_s",
          [&](auto& v, auto& w) { c.feedback.relaxation_per_s = as_double(v, w); });
  fb.read("bound_hz", [&](auto& v, auto& w) { c.feedback.bound_hz = as_double(v, w); });
  fb.read("ramsey_target", [&](auto& v, auto& w) { c.feedback.ramsey_target = as_double(v, w); });
  fb.read("scan_target", [&](auto& v, auto& w) { c.feedback.scan_target = as_double(v, w); });
  fb.read("optical_coupling",
          [&](auto& v, auto& w) { c.feedback.optical_coupling = as_double(v, w); });
  fb.finish();

  auto ro = reader("readout");
  ro.read("efficiency", [&](auto& v, auto& w) { c.readout.efficiency = as_double(v, w); });
  ro.read("dark_rate", [&](auto& v, auto& w) { c.readout.dark_rate = as_double(v, w); });
  ro.read("shots_per_point",
          [&](auto& v, auto& w) { c.readout.shots_per_point = as_long(v, w); });
  ro.read("batch_size", [&](auto& v, auto& w) { c.readout.batch_size = as_long(v, w); });
  ro.read("shot_noise", [&](auto& v, auto& w) { c.readout.shot_noise = as_bool(v, w); });
  ro.finish();

  auto ex = reader("experiment");
  ex.read("scan_direction",
          [&](auto& v, auto& w) { c.experiment.scan_direction = as_string(v, w); });
  ex.read("charge_species",
          [&](auto& v, auto& w) { c.experiment.charge_species = as_string(v, w); });
  ex.read("dwell_s", [&](auto& v, auto& w) { c.experiment.dwell_s = as_double(v, w); });
  ex.read("sweep_start", [&](auto& v, auto& w) { c.experiment.sweep_start = as_double(v, w); });
  ex.read("sweep_stop", [&](auto& v, auto& w) { c.experiment.sweep_stop = as_double(v, w); });
  ex.read("sweep_points", [&](auto& v, auto& w) { c.experiment.sweep_points = as_long(v, w); });
  ex.finish();

  auto out = reader("output");
  out.read("directory", [&](auto& v, auto& w) { c.output.directory = as_string(v, w); });
  out.read("plot", [&](auto& v, auto& w) { c.output.plot = as_bool(v, w); });
  out.finish();
}

}  // namespace

RunConfig RunConfig::from_toml_text(const std::string& text) {
  RunConfig c = defaults();
  apply_document(c, toml::parse(text));
  const auto problems = c.validate();
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return c;
}

RunConfig RunConfig::from_toml_file(const std::string& path) {
  RunConfig c = defaults();
  apply_document(c, toml::parse_file(path));
  const auto problems = c.validate();
  if (!problems.empty()) {
    std::string msg = "invalid config (" + path + "):";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return c;
}

levels::SpinSystem RunConfig::spin_system() const {
  levels::SpinSystem s;
  s.b_field = system.b_field_t;
  s.g_hole = system.g_hole;
  s.g_electron = system.g_electron;
  s.trion_frequency = units::hz_to_rad(system.trion_frequency_hz);
  s.gamma_sp = system.gamma_sp_per_s;
  s.branching_to_dark = system.branching_to_dark;
  s.larmor_bias_slope = units::hz_to_rad(system.larmor_bias_slope_hz_per_v);
  s.bias_ref = system.bias_ref_v;
  s.larmor_ref = system.larmor_ref_hz ? units::hz_to_rad(*system.larmor_ref_hz) : 0.0;
  s.bias_min = system.bias_min_v;
  s.bias_max = system.bias_max_v;
  return s;
}

levels::SelectionRules RunConfig::selection_rules() const {
  return levels::SelectionRules::ideal(pulse.selection_imbalance);
}

noise::NoiseModel RunConfig::noise_model() const {
  noise::NoiseModel n;
  n.sigma_quasistatic = units::hz_to_rad(noise.sigma_quasistatic_hz);
  n.gamma_phi = noise.gamma_phi_per_s;
  n.t1 = noise.t1_s;
  n.optical_linewidth_fwhm = units::ghz_to_rad(noise.optical_linewidth_fwhm_ghz);
  n.bias_modulation.amplitude = noise.bias_mod_amplitude_v;
  n.bias_modulation.frequency = noise.bias_mod_frequency_hz;
  return n;
}

pulses::Hardware RunConfig::hardware() const {
  pulses::Hardware hw;
  hw.pulse.fwhm = pulse.fwhm_ps * units::kPs;
  hw.pulse.detuning = units::ghz_to_rad(pulse.detuning_ghz);
  hw.pulse.peak_rabi = units::hz_to_rad(pulse.omega_peak_hz);
  hw.pulse.shape = pulses::shape_from_string(pulse.shape);
  hw.pulse.polarization = levels::polarization_from_string(pulse.polarization);
  hw.pump.duration = pump.window_ns * units::kNs;
  hw.pump.pump_rabi = units::hz_to_rad(pump.rabi_hz);
  hw.period = 13e-9;
  hw.pad = pump.pad_ns * units::kNs;
  return hw;
}

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> out;
  auto sys_problems = spin_system().validate();
  out.insert(out.end(), sys_problems.begin(), sys_problems.end());
  auto noise_problems = noise_model().validate();
  out.insert(out.end(), noise_problems.begin(), noise_problems.end());

  if (threads < 1) out.push_back("threads must be >= 1");
  if (pulse.fwhm_ps <= 0.0) out.push_back("pulse fwhm_ps must be > 0");
  if (pulse.omega_peak_hz <= 0.0) out.push_back("pulse omega_peak_hz must be > 0");
  if (pulse.pulse_error < 0.0 || pulse.pulse_error >= 1.0)
    out.push_back("pulse_error must lie in [0,1)");
  if (pump.window_ns <= 0.0) out.push_back("pump window_ns must be > 0");
  if (pump.rabi_hz < 0.0) out.push_back("pump rabi_hz must be >= 0");
  if (pump.scan_rabi_scale <= 0.0) out.push_back("pump scan_rabi_scale must be > 0");
  if (feedback.kappa_hole < 1.0 || feedback.kappa_electron < 1.0)
    out.push_back("feedback kappa must be >= 1");
  if (feedback.gain < 0.0) out.push_back("feedback gain must be >= 0");
  if (readout.efficiency < 0.0 || readout.efficiency > 1.0)
    out.push_back("readout efficiency must lie in [0,1]");
  if (readout.dark_rate < 0.0) out.push_back("readout dark_rate must be >= 0");
  if (readout.shots_per_point < 1) out.push_back("shots_per_point must be >= 1");
  if (readout.batch_size < 1) out.push_back("batch_size must be >= 1");
  if (experiment.scan_direction != "up" && experiment.scan_direction != "down" &&
      experiment.scan_direction != "both")
    out.push_back("scan_direction must be up, down or both");
  if (experiment.charge_species != "hole" && experiment.charge_species != "electron")
    out.push_back("charge_species must be hole or electron");
  if (experiment.dwell_s <= 0.0) out.push_back("dwell_s must be > 0");

  try {
    pulses::shape_from_string(pulse.shape);
    levels::polarization_from_string(pulse.polarization);
  } catch (const Error& e) {
    out.push_back(e.what());
  }
  return out;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["system"] = {{"b_field_t", system.b_field_t},
                 {"g_hole", system.g_hole},
                 {"g_electron", system.g_electron},
                 {"trion_frequency_hz", system.trion_frequency_hz},
                 {"gamma_sp_per_s", system.gamma_sp_per_s},
                 {"branching_to_dark", system.branching_to_dark},
                 {"larmor_bias_slope_hz_per_v", system.larmor_bias_slope_hz_per_v},
                 {"bias_ref_v", system.bias_ref_v},
                 {"bias_v", system.bias_v},
                 {"bias_min_v", system.bias_min_v},
                 {"bias_max_v", system.bias_max_v},
                 {"larmor_ref_hz", system.larmor_ref_hz ? nlohmann::json(*system.larmor_ref_hz)
                                                        : nlohmann::json(nullptr)}};
  j["pulse"] = {{"fwhm_ps", pulse.fwhm_ps},
                {"detuning_ghz", pulse.detuning_ghz},
                {"omega_peak_hz", pulse.omega_peak_hz},
                {"pulse_error", pulse.pulse_error},
                {"selection_imbalance", pulse.selection_imbalance},
                {"ideal", pulse.ideal},
                {"shape", pulse.shape},
                {"polarization", pulse.polarization}};
  j["pump"] = {{"window_ns", pump.window_ns},
               {"rabi_hz", pump.rabi_hz},
               {"scan_rabi_scale", pump.scan_rabi_scale},
               {"pad_ns", pump.pad_ns}};
  j["noise"] = {{"sigma_quasistatic_hz", noise.sigma_quasistatic_hz},
                {"gamma_phi_per_s", noise.gamma_phi_per_s},
                {"t1_s", noise.t1_s},
                {"optical_linewidth_fwhm_ghz", noise.optical_linewidth_fwhm_ghz},
                {"bias_mod_amplitude_v", noise.bias_mod_amplitude_v},
                {"bias_mod_frequency_hz", noise.bias_mod_frequency_hz}};
  j["feedback"] = {{"enabled", feedback.enabled},
                   {"gain", feedback.gain},
                   {"kappa_hole", feedback.kappa_hole},
                   {"kappa_electron", feedback.kappa_electron},
                   {"relaxation_per_s", feedback.relaxation_per_s},
                   {"bound_hz", feedback.bound_hz},
                   {"ramsey_target", feedback.ramsey_target},
                   {"scan_target", feedback.scan_target},
                   {"optical_coupling", feedback.optical_coupling}};
  j["readout"] = {{"efficiency", readout.efficiency},
                  {"dark_rate", readout.dark_rate},
                  {"shots_per_point", readout.shots_per_point},
                  {"batch_size", readout.batch_size},
                  {"shot_noise", readout.shot_noise}};
  j["experiment"] = {{"scan_direction", experiment.scan_direction},
                     {"charge_species", experiment.charge_species},
                     {"dwell_s", experiment.dwell_s}};
  if (experiment.sweep_start) j["experiment"]["sweep_start"] = *experiment.sweep_start;
  if (experiment.sweep_stop) j["experiment"]["sweep_stop"] = *experiment.sweep_stop;
  if (experiment.sweep_points) j["experiment"]["sweep_points"] = *experiment.sweep_points;
  j["output"] = {{"directory", output.directory}, {"plot", output.plot}};
  return j;
}

}  // namespace qdspin::config
