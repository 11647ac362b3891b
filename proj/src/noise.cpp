#include "qdspin/noise.hpp"

#include <algorithm>
#include <cmath>

#include "qdspin/errors.hpp"
#include "qdspin/units.hpp"

namespace qdspin::noise {

double NoiseModel::t2_star() const {
  return sigma_quasistatic > 0.0 ? std::sqrt(2.0) / sigma_quasistatic : 0.0;
}

std::vector<std::string> NoiseModel::validate() const {
  std::vector<std::string> out;
  if (sigma_quasistatic < 0.0) out.push_back("sigma_quasistatic must be >= 0");
  if (gamma_phi < 0.0) out.push_back("gamma_phi must be >= 0");
  if (t1 < 0.0) out.push_back("t1 must be >= 0");
  if (optical_linewidth_fwhm < 0.0) out.push_back("optical_linewidth_fwhm must be >= 0");
  if (bias_modulation.amplitude < 0.0) out.push_back("bias modulation amplitude must be >= 0");
  if (bias_modulation.frequency < 0.0) out.push_back("bias modulation frequency must be >= 0");
  return out;
}

double sample_quasistatic(const NoiseModel& model, rng::Stream& stream) {
  if (model.sigma_quasistatic == 0.0) {
    stream.normal();  // keep stream advance independent of sigma
    return 0.0;
  }
  return stream.normal(0.0, model.sigma_quasistatic);
}

double optical_detuning_sample(const NoiseModel& model, rng::Stream& stream) {
  if (model.optical_linewidth_fwhm == 0.0) {
    stream.normal();
    return 0.0;
  }
  return stream.normal(0.0, units::fwhm_to_sigma(model.optical_linewidth_fwhm));
}

double fid_envelope(double t, double t2star) {
  if (t < 0.0) throw DomainError("fid_envelope: t < 0");
  if (t2star <= 0.0) return 1.0;
  const double x = t / t2star;
  return std::exp(-x * x);
}

double echo_envelope(double two_t, double t2) {
  if (two_t < 0.0) throw DomainError("echo_envelope: 2T < 0");
  if (t2 <= 0.0) return 1.0;
  return std::exp(-two_t / t2);
}

OverhauserState update_overhauser(const OverhauserState& state, double eta, double dwell) {
  if (dwell <= 0.0) throw DomainError("update_overhauser: dwell must be > 0");
  OverhauserState next = state;
  double shift = state.shift;
  shift += (state.gain / state.kappa) * eta * dwell;
  shift -= state.relaxation_rate * shift * dwell;
  if (state.bound > 0.0) shift = std::clamp(shift, -state.bound, state.bound);
  next.shift = shift;
  return next;
}

double effective_larmor(const levels::SpinSystem& sys, const NoiseModel& model,
                        const OverhauserState& over, double bias_v, double t,
                        double shot_draw) {
  double omega = levels::larmor_frequency(sys, bias_v) + shot_draw + over.shift;
  const auto& mod = model.bias_modulation;
  if (mod.amplitude > 0.0 && mod.frequency > 0.0) {
    omega += sys.larmor_bias_slope * mod.amplitude *
             std::sin(units::kTwoPi * mod.frequency * t);
  }
  return omega;
}

double modulation_phase_integral(const levels::SpinSystem& sys, const NoiseModel& model,
                                 double t0, double t1, double mod_phase) {
  const auto& mod = model.bias_modulation;
  if (mod.amplitude <= 0.0 || mod.frequency <= 0.0) return 0.0;
  const double w = units::kTwoPi * mod.frequency;
  const double a = sys.larmor_bias_slope * mod.amplitude;
  return (a / w) * (std::cos(w * t0 + mod_phase) - std::cos(w * t1 + mod_phase));
}

}  // namespace qdspin::noise
