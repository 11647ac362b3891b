#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qdspin/units.hpp"

namespace qdspin::levels {

// Basis order used by every 4x4 operator in the project:
//   0: |dn>          lower hole pseudo-spin state (dark under the pump)
//   1: |up>          upper hole pseudo-spin state
//   2: |trion,dn>    trion with electron spin down
//   3: |trion,up>    trion with electron spin up
// Quantization: x along the magnetic field (energy eigenbasis), z along the
// optical axis. A detuned optical pulse rotates the ground pseudo-spin about
// the optical axis; Larmor precession rotates it about x.
enum State : int { kDown = 0, kUp = 1, kTrionDown = 2, kTrionUp = 3 };

enum class Polarization { SigmaPlus, SigmaMinus, H, V };

std::string to_string(Polarization p);
Polarization polarization_from_string(const std::string& name);

// Physical constants of one dot plus the bias-voltage calibration of the
// Larmor frequency. Frequencies are angular (rad/s).
struct SpinSystem {
  double b_field = 8.0;        // T
  double g_hole = 0.0;         // in-plane hole g factor
  double g_electron = 0.0;     // in-plane electron g factor
  double trion_frequency = 0;  // mean optical transition, rad/s
  double gamma_sp = 1.0e9;     // trion spontaneous emission rate, 1/s
  double branching_to_dark = 0.5;  // trion decay fraction into the other ground state

  double larmor_bias_slope = 0.0;  // d(omega_L)/dV, rad/s per volt
  double bias_ref = 1.6;           // V, calibration anchor
  double larmor_ref = 0.0;         // rad/s at bias_ref (0 -> derive from g_hole)
  double bias_min = 1.0;           // V, device operating range
  double bias_max = 2.2;           // V

  double hole_splitting() const;      // delta_HH, rad/s
  double electron_splitting() const;  // delta_e, rad/s
  double larmor_anchor() const;       // resolved larmor_ref

  std::vector<std::string> validate() const;
};

// g mu_B B / hbar
double zeeman_splitting(double g, double b_tesla);

// omega_L(V) = larmor_ref + slope (V - bias_ref); throws RangeError outside
// the device range.
double larmor_frequency(const SpinSystem& sys, double bias_v);

// Dimensionless dipole amplitudes per polarization, ground x trion block.
// Ideal rules: H couples the parallel legs (dn<->T_dn, up<->T_up), V couples
// the cross legs, each with unit amplitude; sigma+- = (H +- V)/sqrt(2).
// Heavy-light hole mixing enters only as an amplitude imbalance between the
// two leg families.
struct SelectionRules {
  Eigen::Matrix2cd h = Eigen::Matrix2cd::Zero();  // (ground, trion)
  Eigen::Matrix2cd v = Eigen::Matrix2cd::Zero();

  static SelectionRules ideal(double mixing_imbalance = 0.0);

  Eigen::Matrix2cd block(Polarization p) const;
  Eigen::Matrix4cd coupling(Polarization p) const;  // Hermitian 4x4

  std::vector<std::string> validate() const;
};

// Optical field envelope at one instant, in the frame rotating at the drive
// carrier (trion_frequency + detuning).
struct DriveField {
  double rabi = 0.0;      // Omega(t), rad/s
  double detuning = 0.0;  // carrier offset from the mean transition, rad/s
  Polarization polarization = Polarization::SigmaPlus;
};

// Rotating-frame Hamiltonian (rad/s):
//   ground diagonal  -+ delta_HH/2
//   trion diagonal   -detuning -+ delta_e/2
//   off-diagonal     Omega/2 x selection-rule amplitude
// Throws DomainError if the coupling structure is invalid.
Eigen::Matrix4cd build_hamiltonian(const SpinSystem& sys, const SelectionRules& rules,
                                   const DriveField& drive);

}  // namespace qdspin::levels
