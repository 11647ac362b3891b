#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdspin/config.hpp"
#include "qdspin/dynamics.hpp"
#include "qdspin/fitting.hpp"
#include "qdspin/noise.hpp"
#include "qdspin/rng.hpp"

namespace qdspin::experiments {

enum class Kind { Rabi, Ramsey, BlochMap, EchoFine, EchoDecay, PumpScan, HysteresisRamsey, T1 };
enum class Species { Hole, Electron };
enum class Direction { Up, Down, Both };

std::string to_string(Kind k);
Kind kind_from_string(const std::string& name);
std::string to_string(Species s);
Species species_from_string(const std::string& name);
std::string to_string(Direction d);
Direction direction_from_string(const std::string& name);

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

struct ExperimentConfig {
  Kind kind = Kind::Ramsey;
  std::vector<SweepAxis> sweep;
  long shots_per_point = 10000;
  long batch_size = 100;  // shots per quasi-static draw
  Direction direction = Direction::Up;
  Species species = Species::Hole;
  std::uint64_t seed = 1;
  int threads = 1;
  double dwell_s = 1.0;
  bool shot_noise = true;
  double bias_v = 1.6;
  double ramsey_theta = std::numbers::pi / 2;
  double echo_two_t = 130e-9;  // total delay for fine echo scans

  std::vector<std::string> validate() const;
};

struct Series {
  std::string direction;            // "up" or "down"
  std::vector<double> mean_counts;  // counts per shot
  std::vector<double> std_err;
  std::vector<long> shots;
};

struct SweepResult {
  Kind kind = Kind::Ramsey;
  std::vector<SweepAxis> axes;  // row-major grid when 2D
  std::vector<Series> series;
  nlohmann::json manifest;

  std::size_t points() const;
  const Series& direction_series(const std::string& dir) const;
};

// binomial(shots, prob x efficiency) + Poisson(dark_rate x shots)
long photon_counts(double prob_excited, long shots, double efficiency, double dark_rate,
                   rng::Stream& stream);

struct HysteresisReport {
  double metric = 0.0;     // normalized L1 area between up and down scans
  double threshold = 0.0;  // 3x its shot-noise expectation
  bool detected = false;
};

// Requires both scan directions on identical axes.
HysteresisReport hysteresis_metric(const SweepResult& result);

// Sweep engine: resolves the config into physics objects, calibrates pulse
// powers against the dynamics oracle, and runs experiments on the analytic
// ground-manifold fast path (full integration remains the test oracle).
class Engine {
 public:
  explicit Engine(const config::RunConfig& cfg);

  // bisection on the simulated rotation angle; tolerance 1e-3 rad
  double calibrate_power(double target_angle) const;
  // unwrapped rotation angle of the optical kick at a given relative power
  double rotation_angle(double power) const;
  double pi_power() const { return power_pi_; }
  double half_pi_power() const { return power_half_; }
  double pi_pulse_duration() const;  // window holding 99% of the pulse area

  ExperimentConfig experiment_config(Kind kind) const;
  SweepResult run(const ExperimentConfig& cfg) const;

  SweepResult run_rabi(const ExperimentConfig& cfg) const;
  SweepResult run_ramsey(const ExperimentConfig& cfg) const;
  SweepResult run_bloch_map(const ExperimentConfig& cfg) const;
  SweepResult run_echo_fine(const ExperimentConfig& cfg) const;
  SweepResult run_echo_decay(const ExperimentConfig& cfg) const;
  SweepResult run_pump_scan(const ExperimentConfig& cfg) const;
  SweepResult run_hysteresis_ramsey(const ExperimentConfig& cfg) const;
  SweepResult run_t1(const ExperimentConfig& cfg) const;

  // Ramsey fringe amplitude versus delay: windows of fine delays around each
  // center are fitted per window (free-induction envelope pipeline).
  struct EnvelopePoint {
    double tau;
    double amplitude;
    double sigma;
  };
  std::vector<EnvelopePoint> ramsey_envelope(const std::vector<double>& centers,
                                             const ExperimentConfig& cfg) const;

  const config::RunConfig& config() const { return cfg_; }
  const levels::SpinSystem& system() const { return sys_; }
  const noise::NoiseModel& noise_model() const { return noise_; }
  const pulses::Hardware& hardware() const { return hw_; }
  double mean_readout_prob() const { return mean_readout_prob_; }
  nlohmann::json manifest(const ExperimentConfig& cfg) const;

 private:
  struct Kick {
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();  // precession wings stripped
    double shrink = 1.0;                                // 1 - pulse error
  };

  Kick make_kick(double power, double omega_nominal) const;
  double readout_window_prob(double optical_offset) const;

  struct FeedbackParams {
    bool enabled = false;
    double kappa = 1.0;
    double gain = 0.0;
    double relaxation = 0.0;
    double bound = 0.0;
    double target = 0.0;
    double optical_coupling = 1.0;
  };
  FeedbackParams feedback_for(const ExperimentConfig& cfg, bool scan) const;

  config::RunConfig cfg_;
  levels::SpinSystem sys_;
  levels::SelectionRules rules_;
  noise::NoiseModel noise_;
  pulses::Hardware hw_;
  dynamics::PumpCycleModel pump_model_;
  double power_pi_ = 0.0;
  double power_half_ = 0.0;
  double mean_readout_prob_ = 1.0;  // shelving prob averaged over spectral diffusion
};

}  // namespace qdspin::experiments
