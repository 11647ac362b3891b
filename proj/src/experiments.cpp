#include "qdspin/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "qdspin/errors.hpp"
#include "qdspin/units.hpp"

namespace qdspin::experiments {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using units::kTwoPi;

namespace {
constexpr const char* kVersion = "qdspin 0.1.0";
constexpr double kPi = std::numbers::pi;
}  // namespace

std::string to_string(Kind k) {
  switch (k) {
    case Kind::Rabi: return "rabi";
    case Kind::Ramsey: return "ramsey";
    case Kind::BlochMap: return "bloch_map";
    case Kind::EchoFine: return "echo_fine";
    case Kind::EchoDecay: return "echo_decay";
    case Kind::PumpScan: return "pump_scan";
    case Kind::HysteresisRamsey: return "hysteresis_ramsey";
    case Kind::T1: return "t1";
  }
  return "?";
}

Kind kind_from_string(const std::string& name) {
  for (Kind k : {Kind::Rabi, Kind::Ramsey, Kind::BlochMap, Kind::EchoFine, Kind::EchoDecay,
                 Kind::PumpScan, Kind::HysteresisRamsey, Kind::T1}) {
    if (to_string(k) == name) return k;
  }
  // CLI spelling with dashes
  std::string s = name;
  std::replace(s.begin(), s.end(), '-', '_');
  for (Kind k : {Kind::Rabi, Kind::Ramsey, Kind::BlochMap, Kind::EchoFine, Kind::EchoDecay,
                 Kind::PumpScan, Kind::HysteresisRamsey, Kind::T1}) {
    if (to_string(k) == s) return k;
  }
  throw DomainError("unknown experiment kind: " + name);
}

std::string to_string(Species s) { return s == Species::Hole ? "hole" : "electron"; }

Species species_from_string(const std::string& name) {
  if (name == "hole") return Species::Hole;
  if (name == "electron") return Species::Electron;
  throw DomainError("unknown species: " + name);
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::Up: return "up";
    case Direction::Down: return "down";
    case Direction::Both: return "both";
  }
  return "?";
}

Direction direction_from_string(const std::string& name) {
  if (name == "up") return Direction::Up;
  if (name == "down") return Direction::Down;
  if (name == "both") return Direction::Both;
  throw DomainError("unknown scan direction: " + name);
}

std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> out;
  if (sweep.empty()) out.push_back("sweep must not be empty");
  for (const auto& ax : sweep)
    if (ax.values.empty()) out.push_back("sweep axis '" + ax.name + "' has no values");
  if (shots_per_point < 1) out.push_back("shots_per_point must be >= 1");
  if (batch_size < 1) out.push_back("batch_size must be >= 1");
  if (threads < 1) out.push_back("threads must be >= 1");
  if (dwell_s <= 0.0) out.push_back("dwell must be > 0");
  return out;
}

std::size_t SweepResult::points() const {
  std::size_t n = 1;
  for (const auto& ax : axes) n *= ax.values.size();
  return n;
}

const Series& SweepResult::direction_series(const std::string& dir) const {
  for (const auto& s : series)
    if (s.direction == dir) return s;
  throw DomainError("sweep result has no '" + dir + "' series");
}

long photon_counts(double prob_excited, long shots, double efficiency, double dark_rate,
                   rng::Stream& stream) {
  if (prob_excited < 0.0 || prob_excited > 1.0)
    throw DomainError("photon_counts: probability outside [0,1]");
  if (efficiency < 0.0 || efficiency > 1.0)
    throw DomainError("photon_counts: efficiency outside [0,1]");
  if (dark_rate < 0.0) throw DomainError("photon_counts: negative dark rate");
  if (shots < 0) throw DomainError("photon_counts: negative shot count");
  long counts = stream.binomial(shots, prob_excited * efficiency);
  if (dark_rate > 0.0) counts += stream.poisson(dark_rate * static_cast<double>(shots));
  return counts;
}

HysteresisReport hysteresis_metric(const SweepResult& result) {
  const Series& up = result.direction_series("up");
  const Series& down = result.direction_series("down");
  if (up.mean_counts.size() != down.mean_counts.size())
    throw DomainError("hysteresis_metric: direction series are not aligned");

  const std::size_t n = up.mean_counts.size();
  double lo = up.mean_counts[0], hi = up.mean_counts[0];
  for (const auto* s : {&up, &down}) {
    for (double v : s->mean_counts) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double amp = std::max(0.5 * (hi - lo), 1e-300);

  double l1 = 0.0, noise_expect = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    l1 += std::abs(up.mean_counts[i] - down.mean_counts[i]);
    const double sd = std::hypot(up.std_err[i], down.std_err[i]);
    noise_expect += sd * std::sqrt(2.0 / kPi);
  }

  HysteresisReport rep;
  rep.metric = l1 / (n * amp);
  rep.threshold = 3.0 * noise_expect / (n * amp);
  rep.detected = rep.metric > rep.threshold;
  return rep;
}

// ---------------------------------------------------------------------------
// Engine

namespace {

Matrix3d su2_to_so3(const Eigen::Matrix2cd& u) {
  Eigen::Matrix2cd sigma[3];
  sigma[0] << 0, 1, 1, 0;
  sigma[1] << 0, std::complex<double>(0, -1), std::complex<double>(0, 1), 0;
  sigma[2] << 1, 0, 0, -1;
  Matrix3d r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r(i, j) = 0.5 * (sigma[i] * u * sigma[j] * u.adjoint()).trace().real();
  return r;
}

Eigen::Matrix2cd free_phase(double omega, double t) {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  m(0, 0) = std::exp(std::complex<double>(0, 0.5 * omega * t));
  m(1, 1) = std::exp(std::complex<double>(0, -0.5 * omega * t));
  return m;
}

struct BatchDraws {
  double delta_omega = 0.0;  // quasi-static Larmor offset
  double delta_opt = 0.0;    // spectral diffusion of the optical line
  double mod_phase = 0.0;    // bias-modulation phase of this batch
};

BatchDraws draw_batch(const noise::NoiseModel& model, rng::Stream& stream) {
  BatchDraws d;
  d.delta_omega = noise::sample_quasistatic(model, stream);
  d.delta_opt = noise::optical_detuning_sample(model, stream);
  d.mod_phase = kTwoPi * stream.uniform();
  return d;
}

std::vector<double> linspace(double a, double b, long n) {
  std::vector<double> v(n);
  for (long i = 0; i < n; ++i)
    v[i] = n > 1 ? a + (b - a) * static_cast<double>(i) / (n - 1) : a;
  return v;
}

}  // namespace

Engine::Engine(const config::RunConfig& cfg)
    : cfg_(cfg),
      sys_(cfg.spin_system()),
      rules_(cfg.selection_rules()),
      noise_(cfg.noise_model()),
      hw_(cfg.hardware()) {
  pump_model_.gamma = sys_.gamma_sp;
  pump_model_.branching = sys_.branching_to_dark;
  pump_model_.pump_rabi = hw_.pump.pump_rabi;
  pump_model_.duration = hw_.pump.duration;

  power_pi_ = calibrate_power(kPi);
  power_half_ = calibrate_power(kPi / 2);
  hw_.angle_per_power = kPi / power_pi_;

  // spectral-diffusion average of the readout shelving probability; the
  // feedback drive is normalized against it so a mid-fringe signal is neutral
  const double sigma = units::fwhm_to_sigma(noise_.optical_linewidth_fwhm);
  if (sigma > 0.0) {
    const int n = 201;
    double acc = 0.0, wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = -4.0 + 8.0 * i / (n - 1);
      const double w = std::exp(-0.5 * z * z);
      acc += w * pump_model_.shelve_probability(z * sigma);
      wsum += w;
    }
    mean_readout_prob_ = acc / wsum;
  } else {
    mean_readout_prob_ = pump_model_.shelve_probability(0.0);
  }
}

double Engine::rotation_angle(double power) const {
  // true rotation angle of the optical kick; the axis sign unfolds the
  // [0, 2pi] wrap and the dressed estimate picks the winding number
  if (power <= 0.0) return 0.0;
  const double pol_sign =
      hw_.pulse.polarization == levels::Polarization::SigmaMinus ? -1.0 : 1.0;
  pulses::Pulse p = hw_.pulse;
  p.center = 0.0;
  p.peak_rabi = hw_.pulse.peak_rabi * std::sqrt(power);
  const auto rot = dynamics::effective_rotation(p, sys_, 0.0);
  const double base = pol_sign * rot.axis.x() >= 0.0 ? rot.angle : kTwoPi - rot.angle;
  const double k = std::round((rot.optical_angle - base) / kTwoPi);
  return base + kTwoPi * std::max(0.0, k);
}

double Engine::calibrate_power(double target_angle) const {
  if (target_angle < 0.0) throw DomainError("calibrate_power: negative target angle");
  if (target_angle == 0.0) return 0.0;

  double hi = 1.0;
  int guard = 0;
  while (rotation_angle(hi) < target_angle) {
    hi *= 2.0;
    if (++guard > 60) throw CalibrationError("calibrate_power: target angle unreachable");
  }
  double lo = 0.0;
  double mid = 0.5 * hi;
  for (int i = 0; i < 200; ++i) {
    mid = 0.5 * (lo + hi);
    const double a = rotation_angle(mid);
    if (std::abs(a - target_angle) < 1e-3) return mid;
    (a < target_angle ? lo : hi) = mid;
  }
  if (std::abs(rotation_angle(mid) - target_angle) >= 1e-3)
    throw CalibrationError("calibrate_power: bisection did not converge");
  return mid;
}

double Engine::pi_pulse_duration() const {
  // central window carrying 99% of the pulse area
  pulses::Pulse p = hw_.pulse;
  p.center = 0.0;
  p.peak_rabi = hw_.pulse.peak_rabi * std::sqrt(power_pi_);
  const int n = 4000;
  const double t0 = p.start(), t1 = p.end();
  const double dt = (t1 - t0) / n;
  std::vector<double> cum(n + 1, 0.0);
  const double delta = std::abs(p.detuning);
  for (int i = 0; i < n; ++i) {
    const double w = p.envelope(t0 + (i + 0.5) * dt);
    const double rate = delta > 0.0
                            ? 0.5 * (std::sqrt(delta * delta + 2.0 * w * w) - delta)
                            : std::sqrt(2.0) * w;
    cum[i + 1] = cum[i] + rate * dt;
  }
  const double total = cum[n];
  double t_lo = t0, t_hi = t1;
  for (int i = 0; i <= n; ++i) {
    if (cum[i] < 0.005 * total) t_lo = t0 + i * dt;
    if (cum[i] <= 0.995 * total) t_hi = t0 + i * dt;
  }
  return t_hi - t_lo;
}

Engine::Kick Engine::make_kick(double power, double omega_nominal) const {
  Kick k;
  if (power <= 0.0) return k;

  if (cfg_.pulse.ideal) {
    // instantaneous exact rotation about the optical axis
    const double theta = rotation_angle(power);
    Eigen::Matrix2cd u;
    u << std::cos(theta / 2), std::complex<double>(0, -std::sin(theta / 2)),
        std::complex<double>(0, -std::sin(theta / 2)), std::cos(theta / 2);
    k.rot = su2_to_so3(u);
    const double eps = cfg_.pulse.pulse_error * std::min(1.0, theta / (kPi / 2));
    k.shrink = std::clamp(1.0 - eps, 0.0, 1.0);
    return k;
  }

  pulses::Pulse p = hw_.pulse;
  p.center = 0.0;
  p.peak_rabi = hw_.pulse.peak_rabi * std::sqrt(power);
  const auto rot = dynamics::effective_rotation(p, sys_, omega_nominal);
  const double w = p.half_support();
  const Eigen::Matrix2cd wing = free_phase(omega_nominal, w).adjoint();
  k.rot = su2_to_so3(wing * rot.u * wing);
  const double eps = cfg_.pulse.pulse_error * std::min(1.0, rot.optical_angle / (kPi / 2)) +
                     rot.residual_trion;
  k.shrink = std::clamp(1.0 - eps, 0.0, 1.0);
  return k;
}

double Engine::readout_window_prob(double optical_offset) const {
  return pump_model_.shelve_probability(optical_offset);
}

Engine::FeedbackParams Engine::feedback_for(const ExperimentConfig& cfg, bool scan) const {
  FeedbackParams fb;
  fb.enabled = cfg_.feedback.enabled;
  fb.kappa = cfg.species == Species::Hole ? cfg_.feedback.kappa_hole : cfg_.feedback.kappa_electron;
  fb.gain = cfg_.feedback.gain;
  fb.relaxation = cfg_.feedback.relaxation_per_s;
  fb.bound = units::hz_to_rad(cfg_.feedback.bound_hz);
  fb.target = scan ? cfg_.feedback.scan_target : cfg_.feedback.ramsey_target;
  fb.optical_coupling = cfg_.feedback.optical_coupling;
  return fb;
}

ExperimentConfig Engine::experiment_config(Kind kind) const {
  ExperimentConfig e;
  e.kind = kind;
  e.shots_per_point = cfg_.readout.shots_per_point;
  e.batch_size = cfg_.readout.batch_size;
  e.direction = direction_from_string(cfg_.experiment.scan_direction);
  e.species = species_from_string(cfg_.experiment.charge_species);
  e.seed = cfg_.seed;
  e.threads = cfg_.threads;
  e.dwell_s = cfg_.experiment.dwell_s;
  e.shot_noise = cfg_.readout.shot_noise;
  e.bias_v = cfg_.system.bias_v;

  const double period = hw_.period;
  switch (kind) {
    case Kind::Rabi:
      e.sweep = {{"power", linspace(0.0, calibrate_power(3.5 * kPi), 81)}};
      e.direction = Direction::Up;
      break;
    case Kind::Ramsey:
      e.sweep = {{"tau_s", linspace(0.0, 300e-12, 301)}};
      e.direction = Direction::Up;
      break;
    case Kind::BlochMap:
      e.sweep = {{"theta_rad", linspace(0.0, kTwoPi, 33)}, {"tau_s", linspace(0.0, 66e-12, 34)}};
      e.direction = Direction::Up;
      break;
    case Kind::EchoFine:
      e.sweep = {{"fine_delay_s", linspace(-66e-12, 66e-12, 133)}};
      e.direction = Direction::Up;
      break;
    case Kind::EchoDecay: {
      std::vector<double> two_t;
      for (long k : {2, 4, 6, 10, 16, 24, 36, 54, 80, 120, 180, 254})
        two_t.push_back(static_cast<double>(k) * period);
      e.sweep = {{"two_t_s", two_t}};
      e.direction = Direction::Up;
      break;
    }
    case Kind::PumpScan:
      e.sweep = {{"detuning_hz", linspace(-12e9, 12e9, 321)}};
      e.batch_size = std::min<long>(e.batch_size, 2);  // spectral diffusion draws
      e.dwell_s = 3.0 * cfg_.experiment.dwell_s;
      break;
    case Kind::HysteresisRamsey:
      // fringes still strong against the quasi-static envelope, delays long
      // enough for the feedback shift to drag the phase
      e.sweep = {{"tau_s", linspace(1.0e-9, 1.4e-9, 121)}};
      e.batch_size = std::min<long>(e.batch_size, 10);
      e.shots_per_point = 3 * cfg_.readout.shots_per_point;
      e.dwell_s = 4.0 * cfg_.experiment.dwell_s;
      break;
    case Kind::T1: {
      std::vector<double> taus = {0.0};
      const double t1 = noise_.t1 > 0.0 ? noise_.t1 : 1e-4;
      for (int i = 0; i < 24; ++i)
        taus.push_back(3.0 * t1 * std::pow(10.0, -2.0 + 2.0 * i / 23.0));
      e.sweep = {{"tau_s", taus}};
      e.direction = Direction::Up;
      break;
    }
  }

  // single-axis overrides from the [experiment] table
  const auto& ov = cfg_.experiment;
  if (e.sweep.size() == 1 && ov.sweep_start && ov.sweep_stop && ov.sweep_points) {
    e.sweep[0].values = linspace(*ov.sweep_start, *ov.sweep_stop, *ov.sweep_points);
  }
  return e;
}

nlohmann::json Engine::manifest(const ExperimentConfig& cfg) const {
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& ax : cfg.sweep)
    axes.push_back({{"name", ax.name}, {"points", ax.values.size()}});

  // representative pulse sequence at the first sweep point
  nlohmann::json seq_json;
  try {
    pulses::Hardware hw = hw_;
    const double first = cfg.sweep.empty() || cfg.sweep[0].values.empty()
                             ? 0.0
                             : cfg.sweep[0].values.front();
    switch (cfg.kind) {
      case Kind::Rabi: seq_json = pulses::to_json(pulses::make_rabi(hw, first)); break;
      case Kind::Ramsey:
      case Kind::HysteresisRamsey:
        seq_json = pulses::to_json(pulses::make_ramsey(hw, first, cfg.ramsey_theta));
        break;
      case Kind::BlochMap:
        seq_json = pulses::to_json(pulses::make_bloch_map(hw, first, 0.0));
        break;
      case Kind::EchoFine:
      case Kind::EchoDecay:
        seq_json = pulses::to_json(pulses::make_echo(
            hw, cfg.kind == Kind::EchoDecay ? first : cfg.echo_two_t,
            cfg.kind == Kind::EchoFine ? first : 0.0));
        break;
      case Kind::PumpScan:
        seq_json = pulses::to_json(pulses::make_pump_scan(hw, units::hz_to_rad(first)));
        break;
      case Kind::T1: seq_json = pulses::to_json(pulses::make_rabi(hw, power_pi_)); break;
    }
  } catch (const Error&) {
    seq_json = nullptr;  // sweep value outside builder preconditions
  }

  return {{"version", kVersion},
          {"sequence", seq_json},
          {"kind", to_string(cfg.kind)},
          {"seed", cfg.seed},
          {"species", to_string(cfg.species)},
          {"direction", to_string(cfg.direction)},
          {"shots_per_point", cfg.shots_per_point},
          {"batch_size", cfg.batch_size},
          {"dwell_s", cfg.dwell_s},
          {"bias_v", cfg.bias_v},
          {"axes", axes},
          {"calibration",
           {{"power_pi", power_pi_},
            {"power_half_pi", power_half_},
            {"angle_per_power_rad", hw_.angle_per_power}}},
          {"config", cfg_.to_json()}};
}

// ---------------------------------------------------------------------------
// shot pipeline helpers

namespace {

struct PointSample {
  double mean = 0.0;   // counts per shot
  double err = 0.0;    // standard error of the mean
  long shots = 0;
};

struct Accumulator {
  double counts = 0.0;
  double var = 0.0;  // expectation mode only
  long shots = 0;
  std::vector<double> batch_rates;  // counts per shot, per batch
  std::vector<long> batch_sizes;

  void add_counts(long c, long n) {
    counts += static_cast<double>(c);
    shots += n;
    batch_rates.push_back(static_cast<double>(c) / n);
    batch_sizes.push_back(n);
  }
  void add_expectation(double rate_per_shot, double var_per_shot, long n) {
    counts += rate_per_shot * n;
    var += var_per_shot * n;
    shots += n;
  }
  PointSample finish() const {
    PointSample p;
    p.shots = shots;
    p.mean = shots > 0 ? counts / shots : 0.0;
    if (batch_rates.empty()) {
      p.err = shots > 0 ? std::sqrt(var) / shots : 0.0;
      return p;
    }
    // batch draws add variance beyond Poisson; use the batch scatter
    const std::size_t nb = batch_rates.size();
    if (nb < 2) {
      p.err = shots > 0 ? std::sqrt(std::max(1.0, counts)) / shots : 0.0;
      return p;
    }
    double ss = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      const double w = static_cast<double>(batch_sizes[b]) / shots;
      const double d = batch_rates[b] - p.mean;
      ss += w * d * d;
    }
    p.err = std::sqrt(ss / (nb - 1));
    return p;
  }
};

void precess(Vector3d& b, double phi, double tau, const noise::NoiseModel& model) {
  const double t1_rate = model.t1 > 0.0 ? 0.5 / model.t1 : 0.0;
  const double trans = std::exp(-(model.gamma_phi + t1_rate) * tau);
  const double longi = model.t1 > 0.0 ? std::exp(-tau / model.t1) : 1.0;
  const double c = std::cos(phi), s = std::sin(phi);
  const double bx = b.x() * c + b.y() * s;
  const double by = -b.x() * s + b.y() * c;
  b = Vector3d(bx * trans, by * trans, b.z() * longi);
}

double p_up(const Vector3d& b) { return 0.5 * (1.0 - b.z()); }

}  // namespace

// ---------------------------------------------------------------------------
// runners

SweepResult Engine::run(const ExperimentConfig& cfg) const {
  const auto problems = cfg.validate();
  if (!problems.empty()) throw DomainError("experiment config: " + problems.front());
  switch (cfg.kind) {
    case Kind::Rabi: return run_rabi(cfg);
    case Kind::Ramsey: return run_ramsey(cfg);
    case Kind::BlochMap: return run_bloch_map(cfg);
    case Kind::EchoFine: return run_echo_fine(cfg);
    case Kind::EchoDecay: return run_echo_decay(cfg);
    case Kind::PumpScan: return run_pump_scan(cfg);
    case Kind::HysteresisRamsey: return run_hysteresis_ramsey(cfg);
    case Kind::T1: return run_t1(cfg);
  }
  throw DomainError("unknown experiment kind");
}

namespace {

// Parallel sweep over independent points; the per-point stream derivation
// keeps results identical for every thread count.
template <typename EvalFn>
Series run_parallel(const std::string& dir_name, std::uint64_t dir_id, std::size_t n_points,
                    int threads, const EvalFn& eval) {
  Series s;
  s.direction = dir_name;
  s.mean_counts.resize(n_points);
  s.std_err.resize(n_points);
  s.shots.resize(n_points);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_points) return;
      const PointSample p = eval(i, dir_id);
      s.mean_counts[i] = p.mean;
      s.std_err[i] = p.err;
      s.shots[i] = p.shots;
    }
  };

  const int nt = std::max(1, threads);
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return s;
}

}  // namespace

SweepResult Engine::run_rabi(const ExperimentConfig& cfg) const {
  const auto& powers = cfg.sweep.at(0).values;
  const double omega0 = noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0, 0.0);

  std::vector<Kick> kicks(powers.size());
  for (std::size_t i = 0; i < powers.size(); ++i) kicks[i] = make_kick(powers[i], omega0);

  const long n_batches = (cfg.shots_per_point + cfg.batch_size - 1) / cfg.batch_size;
  auto eval = [&](std::size_t i, std::uint64_t dir_id) {
    Accumulator acc;
    long remaining = cfg.shots_per_point;
    for (long b = 0; b < n_batches; ++b) {
      auto stream = rng::Stream::derive(cfg.seed, {1, dir_id, i, static_cast<std::uint64_t>(b)});
      const BatchDraws d = draw_batch(noise_, stream);
      const long n = std::min<long>(cfg.batch_size, remaining);
      remaining -= n;

      Vector3d b_vec(0.0, 0.0, 1.0);
      b_vec = kicks[i].shrink * (kicks[i].rot * b_vec);
      const double q_ro = readout_window_prob(d.delta_opt);
      const double p_em = std::clamp(p_up(b_vec) * q_ro, 0.0, 1.0);
      if (cfg.shot_noise) {
        auto c = photon_counts(p_em, n, cfg_.readout.efficiency, cfg_.readout.dark_rate, stream);
        acc.add_counts(c, n);
      } else {
        const double pe = p_em * cfg_.readout.efficiency;
        acc.add_expectation(pe + cfg_.readout.dark_rate, pe * (1 - pe) + cfg_.readout.dark_rate, n);
      }
    }
    return acc.finish();
  };

  SweepResult out;
  out.kind = cfg.kind;
  out.axes = cfg.sweep;
  out.series.push_back(run_parallel("up", 1, powers.size(), cfg.threads, eval));
  out.manifest = manifest(cfg);
  return out;
}

// Ramsey / echo shots apply kicks at fixed centers with precession segments
// between them; segment phases carry the per-batch quasi-static offset, the
// feedback shift and the bias-modulation integral.
SweepResult Engine::run_ramsey(const ExperimentConfig& cfg) const {
  const auto& taus = cfg.sweep.at(0).values;
  const double omega0 = noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0, 0.0);
  const Kick kick = make_kick(calibrate_power(cfg.ramsey_theta), omega0);

  const double t_first = hw_.pump.duration + hw_.pad + hw_.pulse.half_support();
  const long n_batches = (cfg.shots_per_point + cfg.batch_size - 1) / cfg.batch_size;

  auto eval = [&](std::size_t i, std::uint64_t dir_id) {
    const double tau = taus[i];
    Accumulator acc;
    long remaining = cfg.shots_per_point;
    for (long b = 0; b < n_batches; ++b) {
      auto stream = rng::Stream::derive(cfg.seed, {2, dir_id, i, static_cast<std::uint64_t>(b)});
      const BatchDraws d = draw_batch(noise_, stream);
      const long n = std::min<long>(cfg.batch_size, remaining);
      remaining -= n;

      const double omega = noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0,
                                                   d.delta_omega);
      const double mod = noise::modulation_phase_integral(sys_, noise_, t_first, t_first + tau,
                                                          d.mod_phase);
      Vector3d b_vec(0.0, 0.0, 1.0);
      b_vec = kick.shrink * (kick.rot * b_vec);
      precess(b_vec, omega * tau + mod, tau, noise_);
      b_vec = kick.shrink * (kick.rot * b_vec);

      const double q_ro = readout_window_prob(d.delta_opt);
      const double p_em = std::clamp(p_up(b_vec) * q_ro, 0.0, 1.0);
      if (cfg.shot_noise) {
        auto c = photon_counts(p_em, n, cfg_.readout.efficiency, cfg_.readout.dark_rate, stream);
        acc.add_counts(c, n);
      } else {
        const double pe = p_em * cfg_.readout.efficiency;
        acc.add_expectation(pe + cfg_.readout.dark_rate, pe * (1 - pe) + cfg_.readout.dark_rate, n);
      }
    }
    return acc.finish();
  };

  SweepResult out;
  out.kind = cfg.kind;
  out.axes = cfg.sweep;
  out.series.push_back(run_parallel("up", 1, taus.size(), cfg.threads, eval));
  out.manifest = manifest(cfg);
  return out;
}

SweepResult Engine::run_bloch_map(const ExperimentConfig& cfg) const {
  const auto& thetas = cfg.sweep.at(0).values;
  const auto& taus = cfg.sweep.at(1).values;
  const double omega0 = noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0, 0.0);

  std::vector<Kick> kicks(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i)
    kicks[i] = make_kick(calibrate_power(thetas[i]), omega0);

  const std::size_t n_points = thetas.size() * taus.size();
  const long n_batches = (cfg.shots_per_point + cfg.batch_size - 1) / cfg.batch_size;

  auto eval = [&](std::size_t idx, std::uint64_t dir_id) {
    const std::size_t it = idx / taus.size();
    const double tau = taus[idx % taus.size()];
    Accumulator acc;
    long remaining = cfg.shots_per_point;
    for (long b = 0; b < n_batches; ++b) {
      auto stream = rng::Stream::derive(cfg.seed, {3, dir_id, idx, static_cast<std::uint64_t>(b)});
      const BatchDraws d = draw_batch(noise_, stream);
      const long n = std::min<long>(cfg.batch_size, remaining);
      remaining -= n;

      const double omega = noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0,
                                                   d.delta_omega);
      Vector3d b_vec(0.0, 0.0, 1.0);
      b_vec = kicks[it].shrink * (kicks[it].rot * b_vec);
      precess(b_vec, omega * tau, tau, noise_);
      b_vec = kicks[it].shrink * (kicks[it].rot * b_vec);

      const double q_ro = readout_window_prob(d.delta_opt);
      const double p_em = std::clamp(p_up(b_vec) * q_ro, 0.0, 1.0);
      if (cfg.shot_noise) {
        auto c = photon_counts(p_em, n, cfg_.readout.efficiency, cfg_.readout.dark_rate, stream);
        acc.add_counts(c, n);
      } else {
        const double pe = p_em * cfg_.readout.efficiency;
        acc.add_expectation(pe + cfg_.readout.dark_rate, pe * (1 - pe) + cfg_.readout.dark_rate, n);
      }
    }
    return acc.finish();
  };

  SweepResult out;
  out.kind = cfg.kind;
  out.axes = cfg.sweep;
  out.series.push_back(run_parallel("up", 1, n_points, cfg.threads, eval));
  out.manifest = manifest(cfg);
  return out;
}

SweepResult Engine::run_echo_fine(const ExperimentConfig& cfg) const {
  const auto& fines = cfg.sweep.at(0).values;
  SweepResult out;
  out.kind = cfg.kind;
  out.axes = cfg.sweep;

  const double two_t = cfg.echo_two_t;
  const double omega0 = noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0, 0.0);
  const Kick half = make_kick(power_half_, omega0);
  const Kick full = make_kick(power_pi_, omega0);
  const double t_first = hw_.pump.duration + hw_.pad + hw_.pulse.half_support();
  const long n_batches = (cfg.shots_per_point + cfg.batch_size - 1) / cfg.batch_size;

  auto eval = [&](std::size_t i, std::uint64_t dir_id) {
    const double fine = fines[i];
    Accumulator acc;
    long remaining = cfg.shots_per_point;
    for (long b = 0; b < n_batches; ++b) {
      auto stream = rng::Stream::derive(cfg.seed, {4, dir_id, i, static_cast<std::uint64_t>(b)});
      const BatchDraws d = draw_batch(noise_, stream);
      const long n = std::min<long>(cfg.batch_size, remaining);
      remaining -= n;

      const double omega = noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0,
                                                   d.delta_omega);
      const double t1c = t_first;
      const double t2c = t1c + 0.5 * two_t;
      const double t3c = t1c + two_t + fine;
      const double mod1 = noise::modulation_phase_integral(sys_, noise_, t1c, t2c, d.mod_phase);
      const double mod2 = noise::modulation_phase_integral(sys_, noise_, t2c, t3c, d.mod_phase);

      Vector3d b_vec(0.0, 0.0, 1.0);
      b_vec = half.shrink * (half.rot * b_vec);
      precess(b_vec, omega * (t2c - t1c) + mod1, t2c - t1c, noise_);
      b_vec = full.shrink * (full.rot * b_vec);
      precess(b_vec, omega * (t3c - t2c) + mod2, t3c - t2c, noise_);
      b_vec = half.shrink * (half.rot * b_vec);

      const double q_ro = readout_window_prob(d.delta_opt);
      const double p_em = std::clamp(p_up(b_vec) * q_ro, 0.0, 1.0);
      if (cfg.shot_noise) {
        auto c = photon_counts(p_em, n, cfg_.readout.efficiency, cfg_.readout.dark_rate, stream);
        acc.add_counts(c, n);
      } else {
        const double pe = p_em * cfg_.readout.efficiency;
        acc.add_expectation(pe + cfg_.readout.dark_rate, pe * (1 - pe) + cfg_.readout.dark_rate, n);
      }
    }
    return acc.finish();
  };

  out.series.push_back(run_parallel("up", 1, fines.size(), cfg.threads, eval));
  out.manifest = manifest(cfg);
  return out;
}

SweepResult Engine::run_echo_decay(const ExperimentConfig& cfg) const {
  const auto& two_ts = cfg.sweep.at(0).values;

  SweepResult out;
  out.kind = cfg.kind;
  out.axes = cfg.sweep;
  Series s;
  s.direction = "up";
  s.mean_counts.resize(two_ts.size());
  s.std_err.resize(two_ts.size());
  s.shots.resize(two_ts.size());

  // fringe amplitude per total delay from an internal fine scan
  for (std::size_t i = 0; i < two_ts.size(); ++i) {
    ExperimentConfig fine_cfg = cfg;
    fine_cfg.kind = Kind::EchoFine;
    fine_cfg.echo_two_t = two_ts[i];
    fine_cfg.seed = cfg.seed + 7919 * (i + 1);
    fine_cfg.sweep = {{"fine_delay_s", linspace(-33e-12, 33e-12, 67)}};
    const SweepResult fine = run_echo_fine(fine_cfg);

    const auto fit = fitting::fit_sinusoid(fine.axes[0].values,
                                           fine.direction_series("up").mean_counts);
    s.mean_counts[i] = fit.converged ? fit.at("amplitude") : 0.0;
    s.std_err[i] = fit.converged ? fit.sigma("amplitude") : 0.0;
    s.shots[i] = cfg.shots_per_point;
  }

  out.series.push_back(std::move(s));
  out.manifest = manifest(cfg);
  return out;
}

SweepResult Engine::run_pump_scan(const ExperimentConfig& cfg) const {
  const auto& detunings_hz = cfg.sweep.at(0).values;
  const std::size_t n_points = detunings_hz.size();

  dynamics::PumpCycleModel scan = pump_model_;
  scan.pump_rabi = pump_model_.pump_rabi * cfg_.pump.scan_rabi_scale;
  const double n_ref = std::max(scan.cycle_emission(0.0), 1e-300);

  const FeedbackParams fb = feedback_for(cfg, /*scan=*/true);
  const long n_batches = (cfg.shots_per_point + cfg.batch_size - 1) / cfg.batch_size;
  const double dwell_batch = cfg.dwell_s / n_batches;

  SweepResult out;
  out.kind = cfg.kind;
  out.axes = cfg.sweep;

  noise::OverhauserState over;
  over.gain = fb.gain;
  over.kappa = fb.kappa;
  over.relaxation_rate = fb.relaxation;
  over.bound = fb.bound;

  auto run_direction = [&](const std::string& name, std::uint64_t dir_id, bool reversed) {
    Series s;
    s.direction = name;
    s.mean_counts.resize(n_points);
    s.std_err.resize(n_points);
    s.shots.resize(n_points);

    for (std::size_t step = 0; step < n_points; ++step) {
      const std::size_t i = reversed ? n_points - 1 - step : step;
      const double d_laser = units::hz_to_rad(detunings_hz[i]);
      Accumulator acc;
      long remaining = cfg.shots_per_point;
      for (long b = 0; b < n_batches; ++b) {
        auto stream =
            rng::Stream::derive(cfg.seed, {5, dir_id, i, static_cast<std::uint64_t>(b)});
        const BatchDraws d = draw_batch(noise_, stream);
        const long n = std::min<long>(cfg.batch_size, remaining);
        remaining -= n;

        const double shift_opt = fb.enabled ? over.shift * fb.optical_coupling : 0.0;
        const double d_eff = d_laser - d.delta_opt - shift_opt;
        const double emission = std::clamp(scan.cycle_emission(d_eff), 0.0, 1.0);
        double signal_norm;
        if (cfg.shot_noise) {
          auto c =
              photon_counts(emission, n, cfg_.readout.efficiency, cfg_.readout.dark_rate, stream);
          acc.add_counts(c, n);
          signal_norm = static_cast<double>(c) /
                        std::max(1.0, n * cfg_.readout.efficiency * n_ref);
        } else {
          const double pe = emission * cfg_.readout.efficiency;
          acc.add_expectation(pe + cfg_.readout.dark_rate, pe * (1 - pe) + cfg_.readout.dark_rate,
                              n);
          signal_norm = emission / n_ref;
        }
        if (fb.enabled) {
          // absorption pulls the transition toward the laser (dragging); the
          // pull direction follows the slow line center, not the per-batch
          // spectral-diffusion excursion
          const double pull = (d_laser - shift_opt) > 0.0 ? 1.0 : -1.0;
          const double eta = (std::clamp(signal_norm, 0.0, 1.5) - fb.target) * pull;
          over = noise::update_overhauser(over, eta, dwell_batch);
        }
      }
      const PointSample p = acc.finish();
      s.mean_counts[i] = p.mean;
      s.std_err[i] = p.err;
      s.shots[i] = p.shots;
    }
    return s;
  };

  if (cfg.direction == Direction::Up || cfg.direction == Direction::Both)
    out.series.push_back(run_direction("up", 1, false));
  if (cfg.direction == Direction::Down || cfg.direction == Direction::Both)
    out.series.push_back(run_direction("down", 2, true));
  out.manifest = manifest(cfg);
  return out;
}

SweepResult Engine::run_hysteresis_ramsey(const ExperimentConfig& cfg) const {
  const auto& taus = cfg.sweep.at(0).values;
  const std::size_t n_points = taus.size();
  const double omega0 = noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0, 0.0);
  const Kick kick = make_kick(calibrate_power(cfg.ramsey_theta), omega0);

  const FeedbackParams fb = feedback_for(cfg, /*scan=*/false);
  const long n_batches = (cfg.shots_per_point + cfg.batch_size - 1) / cfg.batch_size;
  const double dwell_batch = cfg.dwell_s / n_batches;
  const double t_first = hw_.pump.duration + hw_.pad + hw_.pulse.half_support();
  const double q_ro0 = std::max(mean_readout_prob_, 1e-300);

  SweepResult out;
  out.kind = cfg.kind;
  out.axes = cfg.sweep;

  noise::OverhauserState over;
  over.gain = fb.gain;
  over.kappa = fb.kappa;
  over.relaxation_rate = fb.relaxation;
  over.bound = fb.bound;

  auto run_direction = [&](const std::string& name, std::uint64_t dir_id, bool reversed) {
    Series s;
    s.direction = name;
    s.mean_counts.resize(n_points);
    s.std_err.resize(n_points);
    s.shots.resize(n_points);

    for (std::size_t step = 0; step < n_points; ++step) {
      const std::size_t i = reversed ? n_points - 1 - step : step;
      const double tau = taus[i];
      Accumulator acc;
      long remaining = cfg.shots_per_point;
      for (long b = 0; b < n_batches; ++b) {
        auto stream =
            rng::Stream::derive(cfg.seed, {6, dir_id, i, static_cast<std::uint64_t>(b)});
        const BatchDraws d = draw_batch(noise_, stream);
        const long n = std::min<long>(cfg.batch_size, remaining);
        remaining -= n;

        const double shift = fb.enabled ? over.shift : 0.0;
        const double omega =
            noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0, d.delta_omega) + shift;
        const double mod =
            noise::modulation_phase_integral(sys_, noise_, t_first, t_first + tau, d.mod_phase);

        Vector3d b_vec(0.0, 0.0, 1.0);
        b_vec = kick.shrink * (kick.rot * b_vec);
        precess(b_vec, omega * tau + mod, tau, noise_);
        b_vec = kick.shrink * (kick.rot * b_vec);

        const double q_ro = readout_window_prob(d.delta_opt);
        const double p_em = std::clamp(p_up(b_vec) * q_ro, 0.0, 1.0);
        double signal_norm;
        if (cfg.shot_noise) {
          auto c =
              photon_counts(p_em, n, cfg_.readout.efficiency, cfg_.readout.dark_rate, stream);
          acc.add_counts(c, n);
          signal_norm =
              static_cast<double>(c) / std::max(1.0, n * cfg_.readout.efficiency * q_ro0);
        } else {
          const double pe = p_em * cfg_.readout.efficiency;
          acc.add_expectation(pe + cfg_.readout.dark_rate, pe * (1 - pe) + cfg_.readout.dark_rate,
                              n);
          signal_norm = p_em / q_ro0;
        }
        if (fb.enabled) {
          const double eta = std::clamp(signal_norm, 0.0, 1.5) - fb.target;
          over = noise::update_overhauser(over, eta, dwell_batch);
        }
      }
      const PointSample p = acc.finish();
      s.mean_counts[i] = p.mean;
      s.std_err[i] = p.err;
      s.shots[i] = p.shots;
    }
    return s;
  };

  if (cfg.direction == Direction::Up || cfg.direction == Direction::Both)
    out.series.push_back(run_direction("up", 1, false));
  if (cfg.direction == Direction::Down || cfg.direction == Direction::Both)
    out.series.push_back(run_direction("down", 2, true));
  out.manifest = manifest(cfg);
  return out;
}

SweepResult Engine::run_t1(const ExperimentConfig& cfg) const {
  const auto& taus = cfg.sweep.at(0).values;
  const double omega0 = noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0, 0.0);
  const Kick flip = make_kick(power_pi_, omega0);
  const long n_batches = (cfg.shots_per_point + cfg.batch_size - 1) / cfg.batch_size;

  auto eval = [&](std::size_t i, std::uint64_t dir_id) {
    const double tau = taus[i];
    Accumulator acc;
    long remaining = cfg.shots_per_point;
    for (long b = 0; b < n_batches; ++b) {
      auto stream = rng::Stream::derive(cfg.seed, {7, dir_id, i, static_cast<std::uint64_t>(b)});
      const BatchDraws d = draw_batch(noise_, stream);
      const long n = std::min<long>(cfg.batch_size, remaining);
      remaining -= n;

      Vector3d b_vec(0.0, 0.0, 1.0);
      b_vec = flip.shrink * (flip.rot * b_vec);
      // dark wait: coherence is irrelevant, polarization relaxes
      precess(b_vec, 0.0, tau, noise_);

      const double q_ro = readout_window_prob(d.delta_opt);
      const double p_em = std::clamp(p_up(b_vec) * q_ro, 0.0, 1.0);
      if (cfg.shot_noise) {
        auto c = photon_counts(p_em, n, cfg_.readout.efficiency, cfg_.readout.dark_rate, stream);
        acc.add_counts(c, n);
      } else {
        const double pe = p_em * cfg_.readout.efficiency;
        acc.add_expectation(pe + cfg_.readout.dark_rate, pe * (1 - pe) + cfg_.readout.dark_rate, n);
      }
    }
    return acc.finish();
  };

  SweepResult out;
  out.kind = cfg.kind;
  out.axes = cfg.sweep;
  out.series.push_back(run_parallel("up", 1, taus.size(), cfg.threads, eval));
  out.manifest = manifest(cfg);
  return out;
}

std::vector<Engine::EnvelopePoint> Engine::ramsey_envelope(const std::vector<double>& centers,
                                                           const ExperimentConfig& cfg) const {
  const double period = kTwoPi / noise::effective_larmor(sys_, noise_, {}, cfg.bias_v, 0.0, 0.0);
  std::vector<EnvelopePoint> env;
  env.reserve(centers.size());

  for (std::size_t i = 0; i < centers.size(); ++i) {
    ExperimentConfig w = cfg;
    w.kind = Kind::Ramsey;
    w.seed = cfg.seed + 104729 * (i + 1);
    const double half_span = 1.5 * period;
    w.sweep = {{"tau_s", linspace(std::max(0.0, centers[i] - half_span),
                                  centers[i] + half_span, 34)}};
    const SweepResult r = run_ramsey(w);
    const auto fit = fitting::fit_sinusoid(r.axes[0].values,
                                           r.direction_series("up").mean_counts);
    EnvelopePoint p;
    p.tau = centers[i];
    p.amplitude = fit.converged ? fit.at("amplitude") : 0.0;
    p.sigma = fit.converged ? std::max(fit.sigma("amplitude"), 1e-12) : 1e-12;
    env.push_back(p);
  }
  return env;
}

}  // namespace qdspin::experiments
