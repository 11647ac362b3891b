#include "qdspin/levels.hpp"

#include <cmath>

#include "qdspin/errors.hpp"

namespace qdspin::levels {

using Eigen::Matrix2cd;
using Eigen::Matrix4cd;

std::string to_string(Polarization p) {
  switch (p) {
    case Polarization::SigmaPlus: return "sigma+";
    case Polarization::SigmaMinus: return "sigma-";
    case Polarization::H: return "H";
    case Polarization::V: return "V";
  }
  return "?";
}

Polarization polarization_from_string(const std::string& name) {
  if (name == "sigma+") return Polarization::SigmaPlus;
  if (name == "sigma-") return Polarization::SigmaMinus;
  if (name == "H" || name == "h") return Polarization::H;
  if (name == "V" || name == "v") return Polarization::V;
  throw DomainError("unknown polarization: " + name);
}

double zeeman_splitting(double g, double b_tesla) {
  if (b_tesla < 0.0) throw DomainError("zeeman_splitting: B < 0");
  return g * units::kBohrMagneton * b_tesla / units::kHbar;
}

double SpinSystem::hole_splitting() const { return zeeman_splitting(g_hole, b_field); }

double SpinSystem::electron_splitting() const { return zeeman_splitting(g_electron, b_field); }

double SpinSystem::larmor_anchor() const {
  return larmor_ref != 0.0 ? larmor_ref : hole_splitting();
}

std::vector<std::string> SpinSystem::validate() const {
  std::vector<std::string> out;
  if (b_field < 0.0) out.push_back("b_field must be >= 0");
  if (gamma_sp <= 0.0) out.push_back("gamma_sp must be > 0");
  if (branching_to_dark < 0.0 || branching_to_dark > 1.0)
    out.push_back("branching_to_dark must lie in [0,1]");
  if (bias_min >= bias_max) out.push_back("bias range is empty");
  return out;
}

double larmor_frequency(const SpinSystem& sys, double bias_v) {
  if (bias_v < sys.bias_min || bias_v > sys.bias_max)
    throw RangeError("bias voltage outside device range");
  return sys.larmor_anchor() + sys.larmor_bias_slope * (bias_v - sys.bias_ref);
}

SelectionRules SelectionRules::ideal(double mixing_imbalance) {
  SelectionRules r;
  const double par = 1.0 - mixing_imbalance;
  const double cross = 1.0 + mixing_imbalance;
  // rows: ground (dn, up); cols: trion (T_dn, T_up)
  r.h(0, 0) = par;    // dn <-> T_dn
  r.h(1, 1) = par;    // up <-> T_up
  r.v(0, 1) = cross;  // dn <-> T_up
  r.v(1, 0) = cross;  // up <-> T_dn
  return r;
}

Eigen::Matrix2cd SelectionRules::block(Polarization p) const {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  switch (p) {
    case Polarization::H: return h;
    case Polarization::V: return v;
    case Polarization::SigmaPlus: return (h + v) * inv_sqrt2;
    case Polarization::SigmaMinus: return (h - v) * inv_sqrt2;
  }
  return Matrix2cd::Zero();
}

Eigen::Matrix4cd SelectionRules::coupling(Polarization p) const {
  const Matrix2cd b = block(p);
  Matrix4cd c = Matrix4cd::Zero();
  c.block<2, 2>(0, 2) = b;
  c.block<2, 2>(2, 0) = b.adjoint();
  return c;
}

std::vector<std::string> SelectionRules::validate() const {
  std::vector<std::string> out;
  for (const auto* m : {&h, &v}) {
    for (int g = 0; g < 2; ++g)
      for (int t = 0; t < 2; ++t)
        if (std::abs((*m)(g, t)) > 1.0 + 1e-12)
          out.push_back("dipole amplitude exceeds 1");
  }
  // double-Lambda connectivity: each trion reachable from both grounds
  for (int t = 0; t < 2; ++t) {
    for (int g = 0; g < 2; ++g) {
      if (std::abs(h(g, t)) + std::abs(v(g, t)) == 0.0)
        out.push_back("missing optical leg in double-Lambda structure");
    }
  }
  return out;
}

Eigen::Matrix4cd build_hamiltonian(const SpinSystem& sys, const SelectionRules& rules,
                                   const DriveField& drive) {
  if (!std::isfinite(drive.rabi) || !std::isfinite(drive.detuning))
    throw DomainError("build_hamiltonian: non-finite drive");
  const Matrix4cd c = rules.coupling(drive.polarization);
  if ((c - c.adjoint()).norm() > 1e-12 * (1.0 + c.norm()))
    throw DomainError("build_hamiltonian: coupling matrix is not Hermitian");
  if (c.block<2, 2>(0, 0).norm() != 0.0 || c.block<2, 2>(2, 2).norm() != 0.0)
    throw DomainError("build_hamiltonian: coupling has ground-ground or trion-trion terms");

  const double dhh = sys.hole_splitting();
  const double de = sys.electron_splitting();

  Matrix4cd ham = Matrix4cd::Zero();
  ham(kDown, kDown) = -0.5 * dhh;
  ham(kUp, kUp) = 0.5 * dhh;
  ham(kTrionDown, kTrionDown) = -drive.detuning - 0.5 * de;
  ham(kTrionUp, kTrionUp) = -drive.detuning + 0.5 * de;
  ham += 0.5 * drive.rabi * c;
  return ham;
}

}  // namespace qdspin::levels
