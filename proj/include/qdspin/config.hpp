#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "qdspin/levels.hpp"
#include "qdspin/noise.hpp"
#include "qdspin/pulses.hpp"

namespace qdspin::config {

// Config tables mirror the physics types field-for-field, with ordinary
// frequencies in Hz (converted to rad/s internally) and times in SI seconds
// unless the key name says otherwise.

struct SystemConfig {
  double b_field_t;
  double g_hole;
  double g_electron;
  double trion_frequency_hz;
  double gamma_sp_per_s;
  double branching_to_dark;
  double larmor_bias_slope_hz_per_v;
  double bias_ref_v;
  double bias_v;  // operating point
  double bias_min_v;
  double bias_max_v;
  std::optional<double> larmor_ref_hz;  // absent -> derived from g_hole
};

struct PulseConfig {
  double fwhm_ps;
  double detuning_ghz;
  double omega_peak_hz;  // field Rabi at unit relative power
  double pulse_error;    // per-pulse depolarization
  double selection_imbalance;
  bool ideal;            // instantaneous exact rotations (analytic checks)
  std::string shape;
  std::string polarization;
};

struct PumpConfig {
  double window_ns;
  double rabi_hz;          // Omega_p / 2 pi
  double scan_rabi_scale;  // pump-scan probe power relative to rabi_hz
  double pad_ns;           // guard between pump edges and pulses
};

struct NoiseConfig {
  double sigma_quasistatic_hz;
  double gamma_phi_per_s;
  double t1_s;
  double optical_linewidth_fwhm_ghz;
  double bias_mod_amplitude_v;
  double bias_mod_frequency_hz;
};

struct FeedbackConfig {
  bool enabled;
  double gain;               // rad/s per unit drag signal per second
  double kappa_hole;
  double kappa_electron;
  double relaxation_per_s;
  double bound_hz;           // shift saturation
  double ramsey_target;      // drag set point on the normalized readout
  double scan_target;
  double optical_coupling;   // shift scale factor on the optical transition
};

struct ReadoutConfig {
  double efficiency;
  double dark_rate;  // counts per shot
  long shots_per_point;
  long batch_size;  // shots per quasi-static draw
  bool shot_noise;
};

struct ExperimentConfigTable {
  std::string scan_direction;  // up | down | both
  std::string charge_species;  // hole | electron
  double dwell_s;
  std::optional<double> sweep_start;
  std::optional<double> sweep_stop;
  std::optional<long> sweep_points;
};

struct OutputConfig {
  std::string directory;
  bool plot;
};

struct RunConfig {
  std::uint64_t seed;
  int threads;
  SystemConfig system;
  PulseConfig pulse;
  PumpConfig pump;
  NoiseConfig noise;
  FeedbackConfig feedback;
  ReadoutConfig readout;
  ExperimentConfigTable experiment;
  OutputConfig output;

  static RunConfig defaults();
  // Strict parse: unknown tables or keys are errors.
  static RunConfig from_toml_file(const std::string& path);
  static RunConfig from_toml_text(const std::string& text);

  levels::SpinSystem spin_system() const;
  levels::SelectionRules selection_rules() const;
  noise::NoiseModel noise_model() const;
  pulses::Hardware hardware() const;

  nlohmann::json to_json() const;  // fully resolved echo for manifests
  std::vector<std::string> validate() const;
};

}  // namespace qdspin::config
