#include "qdspin/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace qdspin::dynamics {

using levels::kDown;
using levels::kTrionDown;
using levels::kTrionUp;
using levels::kUp;
using std::complex;

namespace {
const complex<double> kI(0.0, 1.0);
}

DensityMatrix DensityMatrix::pure(int state) {
  DensityMatrix d;
  d.rho(state, state) = 1.0;
  return d;
}

DensityMatrix DensityMatrix::from_ground_bloch(const Vector3d& b) {
  DensityMatrix d;
  d.rho(0, 0) = 0.5 * (1.0 + b.z());
  d.rho(1, 1) = 0.5 * (1.0 - b.z());
  d.rho(0, 1) = 0.5 * complex<double>(b.x(), -b.y());
  d.rho(1, 0) = std::conj(d.rho(0, 1));
  return d;
}

Eigen::Vector3d DensityMatrix::ground_bloch() const {
  return {2.0 * rho(0, 1).real(), -2.0 * rho(0, 1).imag(),
          (rho(0, 0) - rho(1, 1)).real()};
}

double DensityMatrix::trace_error() const { return std::abs(rho.trace().real() - 1.0) + std::abs(rho.trace().imag()); }

double DensityMatrix::hermiticity_error() const { return (rho - rho.adjoint()).norm(); }

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix4cd> es(0.5 * (rho + rho.adjoint()),
                                              Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double DensityMatrix::purity() const { return (rho * rho).trace().real(); }

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  Matrix4cd d = a.rho - b.rho;
  d = 0.5 * (d + d.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4cd> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

std::vector<LindbladTerm> radiative_terms(const levels::SpinSystem& sys) {
  const double beta = sys.branching_to_dark;
  auto channel = [](int from, int to) {
    Matrix4cd op = Matrix4cd::Zero();
    op(to, from) = 1.0;
    return op;
  };
  std::vector<LindbladTerm> terms;
  terms.push_back({channel(kTrionDown, kDown), beta * sys.gamma_sp});
  terms.push_back({channel(kTrionDown, kUp), (1.0 - beta) * sys.gamma_sp});
  terms.push_back({channel(kTrionUp, kUp), beta * sys.gamma_sp});
  terms.push_back({channel(kTrionUp, kDown), (1.0 - beta) * sys.gamma_sp});
  return terms;
}

LindbladTerm ground_dephasing(double gamma_phi) {
  // sigma_z on the ground block; D at rate gamma/2 gives coherence decay
  // exp(-gamma_phi t)
  Matrix4cd op = Matrix4cd::Zero();
  op(kDown, kDown) = 1.0;
  op(kUp, kUp) = -1.0;
  return {op, 0.5 * gamma_phi};
}

std::vector<LindbladTerm> ground_flip_terms(double t1) {
  std::vector<LindbladTerm> terms;
  if (t1 <= 0.0) return terms;
  Matrix4cd up = Matrix4cd::Zero(), dn = Matrix4cd::Zero();
  up(kUp, kDown) = 1.0;
  dn(kDown, kUp) = 1.0;
  // polarization decays as exp(-t/T1)
  terms.push_back({up, 0.5 / t1});
  terms.push_back({dn, 0.5 / t1});
  return terms;
}

namespace {

struct Rhs {
  const HamiltonianFn& ham;
  struct Channel {
    Matrix4cd op, opdag_op;
    double rate;
  };
  std::vector<Channel> channels;
  const Matrix4cd* emission_op;

  Rhs(const HamiltonianFn& h, const std::vector<LindbladTerm>& terms, const Matrix4cd* em)
      : ham(h), emission_op(em) {
    channels.reserve(terms.size());
    for (const auto& t : terms) {
      if (t.rate < 0.0) throw DomainError("Lindblad rate must be >= 0");
      if (t.rate == 0.0) continue;
      channels.push_back({t.op, t.op.adjoint() * t.op, t.rate});
    }
  }

  void operator()(double t, const Matrix4cd& rho, double /*acc*/, Matrix4cd& drho,
                  double& dacc) const {
    const Matrix4cd h = ham(t);
    drho = -kI * (h * rho - rho * h);
    for (const auto& c : channels) {
      drho += c.rate * (c.op * rho * c.op.adjoint() -
                        0.5 * (c.opdag_op * rho + rho * c.opdag_op));
    }
    dacc = emission_op ? (*emission_op * rho).trace().real() : 0.0;
  }
};

// Dormand-Prince 5(4) tableau
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr double kB5[7] = {35.0 / 384,    0.0,          500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784, 11.0 / 84,   0.0};
constexpr double kB4[7] = {5179.0 / 57600,  0.0,         7571.0 / 16695, 393.0 / 640,
                           -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

}  // namespace

Trajectory evolve(const DensityMatrix& rho0, const HamiltonianFn& ham,
                  const std::vector<LindbladTerm>& terms, double t0, double t1,
                  const EvolveOptions& opts, const Matrix4cd* emission_op) {
  if (t1 < t0) throw DomainError("evolve: t1 < t0");
  if (opts.rtol <= 0.0 || opts.atol <= 0.0) throw DomainError("evolve: tolerances must be > 0");

  Rhs rhs(ham, terms, emission_op);
  const double span = t1 - t0;

  Trajectory out;
  out.final = rho0;
  if (opts.keep_trajectory) {
    out.times.push_back(t0);
    out.states.push_back(rho0);
  }
  if (span == 0.0) return out;

  Matrix4cd y = rho0.rho;
  double acc = 0.0;
  double t = t0;

  double h = opts.fixed_step ? (opts.fixed_dt > 0 ? opts.fixed_dt : span / 1000.0)
                             : (opts.initial_step > 0 ? opts.initial_step : span * 1e-3);
  if (opts.max_step > 0.0) h = std::min(h, opts.max_step);

  Matrix4cd k_m[7];
  double k_a[7];
  const long max_steps = 80'000'000;

  while (t < t1) {
    h = std::min(h, t1 - t);
    if (!opts.fixed_step && h < span * 1e-15) {
      DensityMatrix last;
      last.rho = y;
      throw IntegrationError("evolve: step size underflow", last, t);
    }

    rhs(t, y, acc, k_m[0], k_a[0]);
    for (int s = 1; s < 7; ++s) {
      Matrix4cd ys = y;
      double as = acc;
      for (int j = 0; j < s; ++j) {
        if (kA[s][j] != 0.0) {
          ys += (h * kA[s][j]) * k_m[j];
          as += (h * kA[s][j]) * k_a[j];
        }
      }
      rhs(t + kC[s] * h, ys, as, k_m[s], k_a[s]);
    }

    Matrix4cd y5 = y;
    double a5 = acc;
    Matrix4cd err = Matrix4cd::Zero();
    double err_a = 0.0;
    for (int s = 0; s < 7; ++s) {
      if (kB5[s] != 0.0) {
        y5 += (h * kB5[s]) * k_m[s];
        a5 += (h * kB5[s]) * k_a[s];
      }
      const double db = kB5[s] - kB4[s];
      if (db != 0.0) {
        err += (h * db) * k_m[s];
        err_a += (h * db) * k_a[s];
      }
    }

    const double scale = opts.atol + opts.rtol * std::max(y.cwiseAbs().maxCoeff(),
                                                          y5.cwiseAbs().maxCoeff());
    double err_norm = err.cwiseAbs().maxCoeff() / scale;
    err_norm = std::max(err_norm, std::abs(err_a) / (opts.atol + opts.rtol));
    if (!std::isfinite(err_norm)) err_norm = 1e6;  // reject and shrink

    if (opts.fixed_step || err_norm <= 1.0) {
      t += h;
      y = 0.5 * (y5 + y5.adjoint().eval());  // keep Hermitian against roundoff
      acc = a5;
      out.error_estimate += 10.0 * err.cwiseAbs().maxCoeff();
      ++out.steps;
      if (opts.keep_trajectory) {
        DensityMatrix d;
        d.rho = y;
        out.times.push_back(t);
        out.states.push_back(d);
      }
    }

    if (!opts.fixed_step) {
      const double factor = err_norm > 0.0 ? 0.9 * std::pow(err_norm, -0.2) : 5.0;
      h *= std::clamp(factor, 0.2, 5.0);
      if (opts.max_step > 0.0) h = std::min(h, opts.max_step);
    }

    if (out.steps > max_steps) {
      DensityMatrix last;
      last.rho = y;
      throw IntegrationError("evolve: step budget exhausted", last, t);
    }
  }

  out.final.rho = y;
  out.emission = acc;
  return out;
}

Trajectory evolve_pulse(const DensityMatrix& rho0, const pulses::Pulse& pulse,
                        const levels::SpinSystem& sys, const levels::SelectionRules& rules,
                        const EvolveOptions& opts) {
  HamiltonianFn ham = [&pulse, &sys, &rules](double t) {
    levels::DriveField drive{pulse.envelope(t), pulse.detuning, pulse.polarization};
    return levels::build_hamiltonian(sys, rules, drive);
  };
  auto terms = radiative_terms(sys);
  return evolve(rho0, ham, terms, pulse.start(), pulse.end(), opts);
}

PulseRotation effective_rotation(const pulses::Pulse& pulse, const levels::SpinSystem& sys,
                                 double omega_larmor) {
  PulseRotation rot;
  rot.window = 2.0 * pulse.half_support();
  rot.valid = std::abs(pulse.detuning) > 100.0 * sys.gamma_sp;

  const double delta = pulse.detuning;
  const double de = sys.electron_splitting();
  const auto coupling = levels::SelectionRules::ideal().coupling(pulse.polarization);

  // Coherent reduction: propagate the drive Hamiltonian with dissipation
  // dropped, then project onto the ground block. The requested ground
  // splitting replaces the system one so callers can strip precession.
  Matrix4cd diag = Matrix4cd::Zero();
  diag(0, 0) = -0.5 * omega_larmor;
  diag(1, 1) = 0.5 * omega_larmor;
  diag(2, 2) = -delta - 0.5 * de;
  diag(3, 3) = -delta + 0.5 * de;

  const double t0 = pulse.start(), t1 = pulse.end();
  const int n = 2000;
  const double dt = (t1 - t0) / n;

  auto ham = [&](double t) -> Matrix4cd { return diag + (0.5 * pulse.envelope(t)) * coupling; };
  auto deriv = [&](double t, const Matrix4cd& u) -> Matrix4cd { return -kI * (ham(t) * u); };

  // dressed phase rate of the bright ground state; the perturbative limit is
  // Omega^2/(2 delta)
  auto phase_rate = [&](double t) {
    const double w = pulse.envelope(t);
    if (delta == 0.0) return std::sqrt(2.0) * w;
    return 0.5 * (std::sqrt(delta * delta + 2.0 * w * w) - std::abs(delta));
  };

  Matrix4cd u4 = Matrix4cd::Identity();
  double optical_angle = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * dt;
    const Matrix4cd k1 = deriv(t, u4);
    const Matrix4cd k2 = deriv(t + 0.5 * dt, u4 + 0.5 * dt * k1);
    const Matrix4cd k3 = deriv(t + 0.5 * dt, u4 + 0.5 * dt * k2);
    const Matrix4cd k4 = deriv(t + dt, u4 + dt * k3);
    u4 += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    optical_angle += phase_rate(t + 0.5 * dt) * dt;
  }

  // closest unitary to the ground block; singular-value deficit = leakage
  const Matrix2cd g = u4.block<2, 2>(0, 0);
  Eigen::JacobiSVD<Matrix2cd> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix2cd u = svd.matrixU() * svd.matrixV().adjoint();
  rot.residual_trion = std::max(0.0, 1.0 - 0.5 * svd.singularValues().squaredNorm());

  // axis/angle: u = e^{i phi} (cos(a/2) I - i sin(a/2) n.sigma)
  u = u * std::pow(u.determinant(), complex<double>(-0.5));
  const double c = std::clamp(0.5 * (u(0, 0) + u(1, 1)).real(), -1.0, 1.0);
  const Vector3d s_vec(-0.5 * (u(0, 1) + u(1, 0)).imag(),
                       0.5 * (u(0, 1) - u(1, 0)).real(),
                       -0.5 * (u(0, 0) - u(1, 1)).imag());
  const double s_norm = s_vec.norm();
  rot.angle = 2.0 * std::atan2(s_norm, c);
  rot.axis = s_norm > 1e-300 ? Vector3d(s_vec / s_norm) : Vector3d::UnitX();
  rot.u = u;
  rot.optical_angle = optical_angle;
  return rot;
}

DensityMatrix free_precession(const DensityMatrix& rho, double tau, double omega_l,
                              const Damping& damping, const levels::SpinSystem* sys) {
  if (tau < 0.0) throw DomainError("free_precession: tau < 0");
  DensityMatrix out = rho;
  if (tau == 0.0) return out;

  double transverse = 1.0;
  double longitudinal = 1.0;
  if (damping.gamma_phi > 0.0) transverse *= std::exp(-damping.gamma_phi * tau);
  if (damping.t1 > 0.0) {
    transverse *= std::exp(-0.5 * tau / damping.t1);
    longitudinal = std::exp(-tau / damping.t1);
  }

  const complex<double> phase = std::exp(kI * omega_l * tau);
  out.rho(0, 1) = rho.rho(0, 1) * phase * transverse;
  out.rho(1, 0) = std::conj(out.rho(0, 1));

  const double p0 = rho.rho(0, 0).real();
  const double p1 = rho.rho(1, 1).real();
  const double sum = p0 + p1;
  const double diff = (p0 - p1) * longitudinal;
  out.rho(0, 0) = 0.5 * (sum + diff);
  out.rho(1, 1) = 0.5 * (sum - diff);

  // radiative drain of any trion population into the grounds
  const double p22 = rho.rho(2, 2).real();
  const double p33 = rho.rho(3, 3).real();
  if (p22 + p33 > 0.0 && sys != nullptr) {
    const double gamma = sys->gamma_sp;
    const double beta = sys->branching_to_dark;
    const double decayed = 1.0 - std::exp(-gamma * tau);
    out.rho(2, 2) = p22 * (1.0 - decayed);
    out.rho(3, 3) = p33 * (1.0 - decayed);
    out.rho(0, 0) += decayed * (beta * p22 + (1.0 - beta) * p33);
    out.rho(1, 1) += decayed * ((1.0 - beta) * p22 + beta * p33);
    const double optical = std::exp(-0.5 * gamma * tau);
    for (int g = 0; g < 2; ++g)
      for (int t = 2; t < 4; ++t) {
        out.rho(g, t) = rho.rho(g, t) * optical;
        out.rho(t, g) = std::conj(out.rho(g, t));
      }
    out.rho(2, 3) = rho.rho(2, 3) * (1.0 - decayed);
    out.rho(3, 2) = std::conj(out.rho(2, 3));
  }
  return out;
}

PumpResult optical_pump(const DensityMatrix& rho, const pulses::PumpWindow& window,
                        const levels::SpinSystem& sys, const levels::SelectionRules& rules,
                        const EvolveOptions& opts) {
  const double dhh = sys.hole_splitting();
  const double de = sys.electron_splitting();
  const bool up_leg = window.target == pulses::PumpWindow::Target::UpViaTrionDown;

  // frame rotating at the pump carrier; the driven leg sits at -detuning
  Matrix4cd ham = Matrix4cd::Zero();
  ham(kDown, kDown) = -0.5 * dhh;
  ham(kUp, kUp) = 0.5 * dhh;
  if (up_leg) {
    ham(kTrionDown, kTrionDown) = 0.5 * dhh - window.detuning;
    ham(kTrionUp, kTrionUp) = ham(kTrionDown, kTrionDown).real() + de;
  } else {
    ham(kTrionUp, kTrionUp) = -0.5 * dhh - window.detuning;
    ham(kTrionDown, kTrionDown) = ham(kTrionUp, kTrionUp).real() - de;
  }
  // the pump is polarized along the cross legs
  ham += 0.5 * window.pump_rabi * rules.coupling(levels::Polarization::V);

  // detected Raman photons: decay of the pumped trion into the dark ground
  const int pumped_trion = up_leg ? kTrionDown : kTrionUp;
  Matrix4cd emission_op = Matrix4cd::Zero();
  emission_op(pumped_trion, pumped_trion) = sys.branching_to_dark * sys.gamma_sp;

  HamiltonianFn ham_fn = [ham](double) { return ham; };
  auto terms = radiative_terms(sys);
  Trajectory traj = evolve(rho, ham_fn, terms, 0.0, window.duration, opts, &emission_op);
  return {traj.final, traj.emission};
}

double PumpCycleModel::saturation() const {
  return 2.0 * pump_rabi * pump_rabi / (gamma * gamma);
}

double PumpCycleModel::shelving_rate(double detuning) const {
  const double s0 = saturation();
  const double x = 2.0 * detuning / gamma;
  return 0.5 * branching * gamma * s0 / (1.0 + s0 + x * x);
}

double PumpCycleModel::shelve_probability(double detuning) const {
  return 1.0 - std::exp(-shelving_rate(detuning) * duration);
}

double PumpCycleModel::cycle_emission(double detuning) const {
  const double q = shelve_probability(detuning);
  return q / (2.0 - q);
}

}  // namespace qdspin::dynamics
