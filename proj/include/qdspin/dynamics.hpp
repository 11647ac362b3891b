#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "qdspin/errors.hpp"
#include "qdspin/levels.hpp"
#include "qdspin/pulses.hpp"

namespace qdspin::dynamics {

using Eigen::Matrix2cd;
using Eigen::Matrix4cd;
using Eigen::Vector3d;

// 4x4 Hermitian unit-trace state over {dn, up, trion_dn, trion_up}.
struct DensityMatrix {
  Matrix4cd rho = Matrix4cd::Zero();

  static DensityMatrix pure(int state);
  static DensityMatrix ground_down() { return pure(levels::kDown); }
  static DensityMatrix from_ground_bloch(const Vector3d& b);

  double population(int state) const { return rho(state, state).real(); }
  double trion_population() const { return population(2) + population(3); }

  // Bloch vector of the ground 2x2 block; z = +1 is |dn>, x is the optical
  // axis component (|dn>+|up> superposition), consistent with pulse rotations
  // acting about x and Larmor precession about z of this vector.
  Vector3d ground_bloch() const;

  double trace_error() const;        // |tr(rho) - 1|
  double hermiticity_error() const;  // ||rho - rho^dag||
  double min_eigenvalue() const;
  double purity() const;
};

double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

struct LindbladTerm {
  Matrix4cd op;       // collapse operator L
  double rate = 0.0;  // 1/s, prefactor of D[L]
};

// Radiative decay: each trion state decays to both ground states; the
// branching fraction into the spin-flipped (dark) leg is configurable.
std::vector<LindbladTerm> radiative_terms(const levels::SpinSystem& sys);
// Pure dephasing of the ground coherence at coherence-decay rate gamma_phi.
LindbladTerm ground_dephasing(double gamma_phi);
// Ground-state spin flips giving polarization lifetime t1.
std::vector<LindbladTerm> ground_flip_terms(double t1);

struct EvolveOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  double max_step = 0.0;      // 0 -> no cap
  double initial_step = 0.0;  // 0 -> heuristic
  bool fixed_step = false;    // reproducibility fallback
  double fixed_dt = 0.0;
  bool keep_trajectory = false;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;  // only when keep_trajectory
  DensityMatrix final;
  double emission = 0.0;        // integrated rate expectation (see evolve)
  double error_estimate = 0.0;  // conservative accumulated step error
  long steps = 0;
};

// Step-size underflow aborts the integration; the exception carries the last
// accepted state.
struct IntegrationError : Error {
  IntegrationError(const std::string& what, DensityMatrix last, double t)
      : Error(what), last_state(std::move(last)), t_reached(t) {}
  DensityMatrix last_state;
  double t_reached = 0.0;
};

using HamiltonianFn = std::function<Matrix4cd(double)>;

// d rho/dt = -i[H(t), rho] + sum_k rate_k D[L_k] rho, adaptive Dormand-Prince
// 5(4). If emission_op is non-null its expectation is integrated alongside
// the state (photon-count observable).
Trajectory evolve(const DensityMatrix& rho0, const HamiltonianFn& ham,
                  const std::vector<LindbladTerm>& terms, double t0, double t1,
                  const EvolveOptions& opts = {}, const Matrix4cd* emission_op = nullptr);

// Convenience: evolve under one rotation pulse (frame of the pulse carrier).
Trajectory evolve_pulse(const DensityMatrix& rho0, const pulses::Pulse& pulse,
                        const levels::SpinSystem& sys, const levels::SelectionRules& rules,
                        const EvolveOptions& opts = {});

// Ground-manifold reduction of one detuned pulse. The dressed optical phase
// rate (sqrt(detuning^2 + 2 Omega(t)^2) - detuning)/2 is integrated together
// with Larmor precession over the pulse window, giving an SU(2) map; in the
// perturbative limit the optical angle reduces to int Omega^2/(2 detuning) dt.
struct PulseRotation {
  Matrix2cd u = Matrix2cd::Identity();  // ground-block unitary over the window
  Vector3d axis = Vector3d::UnitX();
  double angle = 0.0;           // rotation angle of u
  double optical_angle = 0.0;   // integrated dressed phase (calibration angle)
  double residual_trion = 0.0;  // estimated population left in the trion
  double window = 0.0;          // envelope support duration
  bool valid = true;            // false when |detuning| is not >> gamma_sp
};

PulseRotation effective_rotation(const pulses::Pulse& pulse, const levels::SpinSystem& sys,
                                 double omega_larmor = 0.0);

struct Damping {
  double gamma_phi = 0.0;  // 1/s on the ground coherence
  double t1 = 0.0;         // s, 0 -> no ground relaxation
};

// Analytic free evolution: ground coherence precesses at omega_l and damps;
// trion populations decay radiatively into the grounds.
DensityMatrix free_precession(const DensityMatrix& rho, double tau, double omega_l,
                              const Damping& damping = {},
                              const levels::SpinSystem* sys = nullptr);

struct PumpResult {
  DensityMatrix state;
  double emission = 0.0;  // expected photons on the detected Raman leg
};

// Full integration of one CW pump window (own resonant frame).
PumpResult optical_pump(const DensityMatrix& rho, const pulses::PumpWindow& window,
                        const levels::SpinSystem& sys,
                        const levels::SelectionRules& rules = levels::SelectionRules::ideal(),
                        const EvolveOptions& opts = {});

// Closed-form pump-cycle model used by the sweep engine; the full
// optical_pump integration above is its accuracy oracle.
struct PumpCycleModel {
  double gamma = 1e9;       // trion decay rate
  double branching = 0.5;   // fraction into the detected (dark) leg
  double pump_rabi = 0.0;   // Omega_p
  double duration = 26e-9;

  double saturation() const;               // s0 = 2 Omega_p^2 / gamma^2
  double shelving_rate(double detuning) const;
  double shelve_probability(double detuning) const;  // q(d) over the window
  // photons per init+flip+readout cycle in steady state: q/(2-q)
  double cycle_emission(double detuning) const;
};

}  // namespace qdspin::dynamics
