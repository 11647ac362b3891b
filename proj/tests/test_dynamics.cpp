#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "qdspin/dynamics.hpp"
#include "qdspin/errors.hpp"
#include "qdspin/rng.hpp"
#include "qdspin/units.hpp"

using namespace qdspin;
using namespace qdspin::units;
using namespace qdspin::dynamics;
using levels::SelectionRules;

namespace {

EvolveOptions tight() {
  EvolveOptions o;
  o.rtol = 1e-10;
  o.atol = 1e-14;
  return o;
}

// pi-area pulse for the default system, found by bisection on the dressed
// optical angle
pulses::Pulse pi_pulse(const levels::SpinSystem& sys, double target = std::numbers::pi) {
  pulses::Pulse p;
  p.center = 40e-12;
  double lo = 0.0, hi = 1e13;
  for (int i = 0; i < 120; ++i) {
    p.peak_rabi = 0.5 * (lo + hi);
    (effective_rotation(p, sys).optical_angle < target ? lo : hi) = p.peak_rabi;
  }
  return p;
}

}  // namespace

TEST_CASE("density matrix basics") {
  const auto rho = DensityMatrix::ground_down();
  CHECK(rho.trace_error() < 1e-15);
  CHECK(rho.hermiticity_error() == 0.0);
  CHECK(rho.min_eigenvalue() >= 0.0);
  CHECK(rho.ground_bloch().z() == doctest::Approx(1.0));

  const Eigen::Vector3d b(0.3, -0.4, 0.5);
  const auto d = DensityMatrix::from_ground_bloch(b);
  CHECK((d.ground_bloch() - b).norm() < 1e-14);
}

TEST_CASE("evolve: identity without generator") {
  const auto rho = DensityMatrix::from_ground_bloch({0.6, 0.0, 0.8});
  HamiltonianFn h = [](double) { return Eigen::Matrix4cd::Zero(); };
  const auto traj = evolve(rho, h, {}, 0.0, 5e-9, tight());
  CHECK(trace_distance(traj.final, rho) < 1e-12);
}

TEST_CASE("trion decays at gamma: population e^-1 after 1 ns") {
  auto sys = test::default_system();
  sys.gamma_sp = 1e9;
  const auto rho = DensityMatrix::pure(levels::kTrionDown);
  HamiltonianFn h = [](double) { return Eigen::Matrix4cd::Zero(); };
  const auto traj = evolve(rho, h, radiative_terms(sys), 0.0, 1e-9, tight());
  CHECK(traj.final.trion_population() == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
  CHECK(traj.final.trace_error() < 1e-9);
}

TEST_CASE("ground spin returns after one Larmor period") {
  const auto sys = test::default_system();
  const double omega = sys.hole_splitting();
  const auto rules = SelectionRules::ideal();
  const auto rho0 = DensityMatrix::from_ground_bloch({1.0, 0.0, 0.0});
  HamiltonianFn h = [&](double) {
    return levels::build_hamiltonian(sys, rules, levels::DriveField{});
  };
  const auto traj = evolve(rho0, h, {}, 0.0, kTwoPi / omega, tight());
  CHECK(trace_distance(traj.final, rho0) < 1e-7);
}

TEST_CASE("invariants hold across randomized evolutions") {
  const auto sys = test::default_system();
  const auto rules = SelectionRules::ideal();
  rng::Stream s(5);
  for (int i = 0; i < 40; ++i) {
    // random valid state
    Eigen::Matrix4cd a;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) a(r, c) = std::complex<double>(s.normal(), s.normal());
    DensityMatrix rho;
    rho.rho = a * a.adjoint();
    rho.rho /= rho.rho.trace();

    levels::DriveField d;
    d.rabi = 2e9 * s.uniform();
    d.detuning = 1e10 * (s.uniform() - 0.5);
    const auto ham = levels::build_hamiltonian(sys, rules, d);
    HamiltonianFn h = [ham](double) { return ham; };

    auto terms = radiative_terms(sys);
    terms.push_back(ground_dephasing(1e6));
    const auto traj = evolve(rho, h, terms, 0.0, 3e-9 * s.uniform());
    CHECK(traj.final.trace_error() <= 1e-9);
    CHECK(traj.final.hermiticity_error() <= 1e-12);
    CHECK(traj.final.min_eigenvalue() >= -1e-9);
  }
}

TEST_CASE("purity never increases under unital dissipation") {
  // radiative decay purifies (it cools toward the ground manifold); the
  // monotone statement applies to the dephasing/flip channels
  const auto sys = test::default_system();
  rng::Stream s(17);
  for (int i = 0; i < 20; ++i) {
    Eigen::Vector3d b(s.normal(), s.normal(), s.normal());
    b /= std::max(1.0, b.norm() * (0.8 + 0.4 * s.uniform()));
    if (b.norm() > 1.0) b /= b.norm();
    auto rho = DensityMatrix::from_ground_bloch(b);

    const auto ham = levels::build_hamiltonian(sys, SelectionRules::ideal(), {});
    HamiltonianFn h = [ham](double) { return ham; };
    std::vector<LindbladTerm> terms = {ground_dephasing(5e8)};
    for (auto& t : ground_flip_terms(2e-9)) terms.push_back(t);

    double purity = rho.purity();
    auto state = rho;
    for (int step = 0; step < 5; ++step) {
      state = evolve(state, h, terms, 0.0, 0.4e-9).final;
      const double p = state.purity();
      CHECK(p <= purity + 1e-9);
      purity = p;
    }
  }
}

TEST_CASE("fixed-step fallback matches the adaptive result") {
  const auto sys = test::default_system();
  const auto ham = levels::build_hamiltonian(sys, SelectionRules::ideal(), {});
  HamiltonianFn h = [ham](double) { return ham; };
  const auto rho0 = DensityMatrix::from_ground_bloch({0.6, 0.3, 0.74});

  const auto adaptive = evolve(rho0, h, radiative_terms(sys), 0.0, 1e-9, tight());
  EvolveOptions fixed;
  fixed.fixed_step = true;
  fixed.fixed_dt = 1e-13;
  const auto stepped = evolve(rho0, h, radiative_terms(sys), 0.0, 1e-9, fixed);
  CHECK(stepped.steps == 10000);
  CHECK(trace_distance(adaptive.final, stepped.final) < 1e-8);
}

TEST_CASE("step-size underflow raises with the last good state") {
  const auto rho = DensityMatrix::ground_down();
  // generator jumps to an unresolvable magnitude mid-span
  HamiltonianFn h = [](double t) {
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    const double w = t < 2e-9 ? 1e9 : 1e30;
    m(0, 1) = m(1, 0) = w;
    return m;
  };
  try {
    evolve(rho, h, {}, 0.0, 3e-9, tight());
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.t_reached >= 0.0);
    CHECK(e.t_reached <= 2.1e-9);
    CHECK(e.last_state.trace_error() < 1e-6);
  }
}

TEST_CASE("effective rotation: identity at zero power") {
  const auto sys = test::default_system();
  pulses::Pulse p;
  p.peak_rabi = 0.0;
  const auto rot = effective_rotation(p, sys);
  CHECK(rot.angle == 0.0);
  CHECK(rot.optical_angle == 0.0);
  CHECK(rot.residual_trion < 1e-12);
}

TEST_CASE("effective pi rotation matches the full integration to 1e-3") {
  const auto sys = test::default_system();
  const auto rules = SelectionRules::ideal();
  const double omega = sys.hole_splitting();
  const auto p = pi_pulse(sys);

  const auto full = evolve_pulse(DensityMatrix::ground_down(), p, sys, rules, tight());

  const auto rot = effective_rotation(p, sys, omega);
  Eigen::Matrix2cd g = Eigen::Matrix2cd::Zero();
  g(0, 0) = 1.0;
  g = rot.u * g * rot.u.adjoint();
  DensityMatrix eff;
  eff.rho.block<2, 2>(0, 0) = g;

  // the reduction lives on the ground manifold; compare once the trion
  // transients have radiated away
  const double settle = 10e-9;
  const auto a = free_precession(full.final, settle, omega, {}, &sys);
  const auto b = free_precession(eff, settle, omega, {}, &sys);
  CHECK(trace_distance(a, b) <= 1e-3);

  // the transfer itself is near-complete and the leakage estimate matches
  CHECK(full.final.population(levels::kUp) == doctest::Approx(eff.rho(1, 1).real()).epsilon(2e-3));
  CHECK(rot.residual_trion == doctest::Approx(full.final.trion_population()).epsilon(0.3));
}

TEST_CASE("doubling the detuning halves a weak pulse's angle") {
  const auto sys = test::default_system();
  pulses::Pulse p;
  p.center = 40e-12;
  p.peak_rabi = 0.15 * p.detuning;  // perturbative regime
  const double a1 = effective_rotation(p, sys).optical_angle;
  p.detuning *= 2.0;
  const double a2 = effective_rotation(p, sys).optical_angle;
  CHECK(a2 / a1 == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("composed Ramsey matches the full integration to 5e-3") {
  const auto sys = test::default_system();
  const auto rules = SelectionRules::ideal();
  const double omega = sys.hole_splitting();
  const auto ph = pi_pulse(sys, std::numbers::pi / 2);

  const double tau = 100.3e-12;
  pulses::Pulse p1 = ph, p2 = ph;
  p1.center = 40e-12;
  p2.center = p1.center + tau;

  auto s1 = evolve_pulse(DensityMatrix::ground_down(), p1, sys, rules, tight());
  HamiltonianFn hfree = [&](double) {
    return levels::build_hamiltonian(sys, rules, {0.0, p1.detuning, p1.polarization});
  };
  auto s2 = evolve(s1.final, hfree, radiative_terms(sys), p1.end(), p2.start(), tight());
  auto s3 = evolve_pulse(s2.final, p2, sys, rules, tight());
  const auto full = free_precession(s3.final, 10e-9, omega, {}, &sys);

  // kick-at-center composition
  const auto rot = effective_rotation(ph, sys, omega);
  const double w = ph.half_support();
  auto phase = [&](double t) {
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
    m(0, 0) = std::exp(std::complex<double>(0, 0.5 * omega * t));
    m(1, 1) = std::exp(std::complex<double>(0, -0.5 * omega * t));
    return m;
  };
  const Eigen::Matrix2cd kick = phase(w).adjoint() * rot.u * phase(w).adjoint();
  const Eigen::Matrix2cd um = phase(w) * kick * phase(tau) * kick * phase(w);

  Eigen::Matrix2cd g = Eigen::Matrix2cd::Zero();
  g(0, 0) = 1.0;
  g = um * g * um.adjoint();
  DensityMatrix eff;
  eff.rho.block<2, 2>(0, 0) = g;
  const auto eff_settled = free_precession(eff, 10e-9, omega, {}, &sys);

  CHECK(trace_distance(full, eff_settled) <= 5e-3);
}

TEST_CASE("free precession") {
  const auto rho = DensityMatrix::from_ground_bloch({1.0, 0.0, 0.0});
  const double omega = hz_to_rad(30.2e9);

  SUBCASE("zero delay is the identity") {
    CHECK(trace_distance(free_precession(rho, 0.0, omega), rho) == 0.0);
  }
  SUBCASE("half a period flips the transverse component") {
    const auto out = free_precession(rho, std::numbers::pi / omega, omega);
    CHECK(out.ground_bloch().x() == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("pole states are stationary") {
    const auto pole = DensityMatrix::from_ground_bloch({0.0, 0.0, 1.0});
    const auto out = free_precession(pole, 0.37e-9, omega);
    CHECK(trace_distance(out, pole) < 1e-15);
  }
  SUBCASE("negative delay is rejected") {
    CHECK_THROWS_AS(free_precession(rho, -1e-12, omega), DomainError);
  }
  SUBCASE("matches evolve under zero drive to 1e-9") {
    const auto sys = test::default_system();
    const auto ham = levels::build_hamiltonian(sys, SelectionRules::ideal(), {});
    HamiltonianFn h = [ham](double) { return ham; };
    EvolveOptions very_tight;
    very_tight.rtol = 1e-12;
    very_tight.atol = 1e-16;
    rng::Stream s(29);
    for (int i = 0; i < 8; ++i) {
      Eigen::Vector3d b(s.normal(), s.normal(), s.normal());
      b /= std::max(1.0, b.norm());
      const auto start = DensityMatrix::from_ground_bloch(b);
      const double tau = 1e-9 * s.uniform();
      const auto via_evolve = evolve(start, h, {}, 0.0, tau, very_tight).final;
      const auto analytic = free_precession(start, tau, sys.hole_splitting());
      CHECK(trace_distance(via_evolve, analytic) < 1e-9);
    }
  }
  SUBCASE("dephasing and relaxation factors") {
    Damping d;
    d.gamma_phi = 1e9;
    d.t1 = 1e-6;
    const double tau = 1e-9;
    const auto out = free_precession(rho, tau, 0.0, d);
    CHECK(out.ground_bloch().x() ==
          doctest::Approx(std::exp(-(1e9 + 0.5 / 1e-6) * tau)).epsilon(1e-9));
  }
}

TEST_CASE("optical pumping") {
  const auto sys = test::default_system();
  pulses::PumpWindow w;
  w.pump_rabi = config::RunConfig::defaults().hardware().pump.pump_rabi;
  w.duration = 26e-9;

  SUBCASE("dark state stays dark up to the far-detuned repump leak") {
    const auto out = optical_pump(DensityMatrix::ground_down(), w, sys);
    CHECK(out.state.population(levels::kDown) > 0.99);
    CHECK(out.emission < 0.05);
  }
  SUBCASE("bright state is shelved within the window") {
    const auto out = optical_pump(DensityMatrix::pure(levels::kUp), w, sys);
    CHECK(out.state.population(levels::kDown) >= 0.99);
    // about one detected photon per shelving event
    CHECK(out.emission == doctest::Approx(out.state.population(levels::kDown)).epsilon(0.05));
  }
  SUBCASE("emission is linear in the initial state") {
    const auto bright = optical_pump(DensityMatrix::pure(levels::kUp), w, sys);
    const auto dark = optical_pump(DensityMatrix::ground_down(), w, sys);
    const auto mixed =
        optical_pump(DensityMatrix::from_ground_bloch({0.0, 0.0, 0.0}), w, sys);
    CHECK(mixed.emission ==
          doctest::Approx(0.5 * (bright.emission + dark.emission)).epsilon(1e-3));
  }
  SUBCASE("halving the tolerance moves the state less than the error estimate") {
    EvolveOptions loose;
    loose.rtol = 1e-6;
    loose.atol = 1e-10;
    EvolveOptions tighter = loose;
    tighter.rtol = 5e-7;

    const auto rho = DensityMatrix::pure(levels::kUp);
    pulses::PumpWindow w2 = w;
    w2.duration = 5e-9;
    const auto a = optical_pump(rho, w2, sys, levels::SelectionRules::ideal(), loose);
    const auto b = optical_pump(rho, w2, sys, levels::SelectionRules::ideal(), tighter);

    // rebuild the same generator to read off the loose run's error estimate
    const double dhh = sys.hole_splitting();
    const double de = sys.electron_splitting();
    Eigen::Matrix4cd ham = Eigen::Matrix4cd::Zero();
    ham(levels::kDown, levels::kDown) = -0.5 * dhh;
    ham(levels::kUp, levels::kUp) = 0.5 * dhh;
    ham(levels::kTrionDown, levels::kTrionDown) = 0.5 * dhh;
    ham(levels::kTrionUp, levels::kTrionUp) = 0.5 * dhh + de;
    ham += 0.5 * w2.pump_rabi *
           levels::SelectionRules::ideal().coupling(levels::Polarization::V);
    HamiltonianFn h = [&ham](double) { return ham; };
    const auto loose_traj = evolve(rho, h, radiative_terms(sys), 0.0, w2.duration, loose);

    CHECK(trace_distance(a.state, b.state) < loose_traj.error_estimate);
  }
}

TEST_CASE("pump cycle model tracks the full integration") {
  const auto sys = test::default_system();
  const auto hw = config::RunConfig::defaults().hardware();

  PumpCycleModel m;
  m.gamma = sys.gamma_sp;
  m.branching = sys.branching_to_dark;
  m.pump_rabi = hw.pump.pump_rabi;
  m.duration = 10e-9;

  pulses::PumpWindow w = hw.pump;
  w.duration = 10e-9;
  const auto full = optical_pump(DensityMatrix::pure(levels::kUp), w, sys);
  CHECK(m.shelve_probability(0.0) ==
        doctest::Approx(full.state.population(levels::kDown)).epsilon(0.03));
}
