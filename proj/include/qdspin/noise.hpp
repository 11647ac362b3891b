#pragma once

#include "qdspin/levels.hpp"
#include "qdspin/rng.hpp"

namespace qdspin::noise {

// All decoherence channels. sigma_quasistatic sets the Gaussian free-induction
// envelope exp(-sigma^2 t^2 / 2), i.e. T2* = sqrt(2)/sigma; gamma_phi sets the
// exponential echo envelope exp(-2T gamma_phi).
struct NoiseModel {
  double sigma_quasistatic = 0.0;       // rad/s, shot-to-shot Larmor detuning std
  double gamma_phi = 0.0;               // 1/s, Markovian pure dephasing
  double t1 = 0.0;                      // s, ground polarization lifetime (0 = off)
  double optical_linewidth_fwhm = 0.0;  // rad/s, Gaussian spectral diffusion

  struct BiasModulation {
    double amplitude = 0.0;  // V
    double frequency = 0.0;  // Hz
  } bias_modulation;

  double t2_star() const;  // sqrt(2)/sigma, 0 when sigma = 0

  std::vector<std::string> validate() const;
};

double sample_quasistatic(const NoiseModel& model, rng::Stream& stream);
double optical_detuning_sample(const NoiseModel& model, rng::Stream& stream);

double fid_envelope(double t, double t2star);       // exp(-(t/T2*)^2)
double echo_envelope(double two_t, double t2);      // exp(-2T/T2)

// Hysteretic nuclear-feedback state. The shift is the current Overhauser
// contribution to omega_L; pumping drives it at gain/kappa and it relaxes
// toward zero. kappa >> 1 models the suppressed hole hyperfine coupling.
struct OverhauserState {
  double shift = 0.0;            // rad/s
  double gain = 0.0;             // rad/s per unit drag signal per second
  double kappa = 1.0;            // suppression factor (>= 1)
  double relaxation_rate = 0.0;  // 1/s
  double bound = 0.0;            // rad/s saturation (0 = unbounded)
};

// One feedback step: the drag signal eta is the deviation of the normalized
// pump activity from its set point.
OverhauserState update_overhauser(const OverhauserState& state, double eta, double dwell);

// omega_L(bias) + quasi-static draw + Overhauser shift + bias modulation at t.
double effective_larmor(const levels::SpinSystem& sys, const NoiseModel& model,
                        const OverhauserState& over, double bias_v, double t,
                        double shot_draw);

// Phase accumulated by the bias-modulation term between t0 and t1 for a given
// per-shot modulation phase (radians); closed form, used by the fast path.
double modulation_phase_integral(const levels::SpinSystem& sys, const NoiseModel& model,
                                 double t0, double t1, double mod_phase);

}  // namespace qdspin::noise
