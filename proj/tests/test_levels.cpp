#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "qdspin/errors.hpp"
#include "qdspin/levels.hpp"
#include "qdspin/rng.hpp"
#include "qdspin/units.hpp"

using namespace qdspin;
using namespace qdspin::units;
using namespace qdspin::levels;

TEST_CASE("zeeman splitting values") {
  CHECK(zeeman_splitting(0.0, 8.0) == 0.0);

  // g inverted from the quoted 8 T splittings
  const double g_h = test::g_for_splitting(30.2e9, 8.0);
  const double g_e = test::g_for_splitting(35.0e9, 8.0);
  CHECK(g_h == doctest::Approx(0.2697).epsilon(1e-3));
  CHECK(g_e == doctest::Approx(0.3126).epsilon(1e-3));
  CHECK(zeeman_splitting(g_h, 8.0) == doctest::Approx(hz_to_rad(30.2e9)).epsilon(1e-12));
  CHECK(zeeman_splitting(g_e, 8.0) == doctest::Approx(hz_to_rad(35.0e9)).epsilon(1e-12));

  CHECK_THROWS_AS(zeeman_splitting(0.3, -1.0), DomainError);
}

TEST_CASE("zeeman splitting is linear in field") {
  rng::Stream s(11);
  for (int i = 0; i < 200; ++i) {
    const double g = 2.0 * s.uniform() - 1.0;
    const double b = 12.0 * s.uniform();
    CHECK(zeeman_splitting(g, 2.0 * b) ==
          doctest::Approx(2.0 * zeeman_splitting(g, b)).epsilon(1e-12));
  }
}

TEST_CASE("default system reproduces the 8 T hole splitting to 0.01%") {
  const auto sys = test::default_system();
  CHECK(std::abs(sys.hole_splitting() - hz_to_rad(30.2e9)) / hz_to_rad(30.2e9) < 1e-4);
}

TEST_CASE("selection rules: ideal double-Lambda") {
  const auto rules = SelectionRules::ideal();
  CHECK(rules.validate().empty());

  // every trion reachable from both grounds across H and V
  for (int t = 0; t < 2; ++t)
    for (int g = 0; g < 2; ++g)
      CHECK(std::abs(rules.h(g, t)) + std::abs(rules.v(g, t)) > 0.0);

  // sigma+- amplitudes stay within [0,1]
  for (auto pol : {Polarization::SigmaPlus, Polarization::SigmaMinus}) {
    const auto b = rules.block(pol);
    for (int g = 0; g < 2; ++g)
      for (int t = 0; t < 2; ++t) CHECK(std::abs(b(g, t)) <= 1.0 + 1e-12);
  }

  SelectionRules broken = rules;
  broken.h(0, 0) = 0.0;
  broken.v(0, 0) = 0.0;  // dn loses its T_dn legs entirely
  CHECK_FALSE(broken.validate().empty());

  SelectionRules overdriven = rules;
  overdriven.h(0, 0) = 1.5;
  CHECK_FALSE(overdriven.validate().empty());
}

TEST_CASE("hamiltonian is Hermitian for random drives") {
  const auto sys = test::default_system();
  const auto rules = SelectionRules::ideal();
  rng::Stream s(23);
  for (int i = 0; i < 100; ++i) {
    DriveField d;
    d.rabi = 1e13 * s.uniform();
    d.detuning = 1e13 * (s.uniform() - 0.5);
    d.polarization = static_cast<Polarization>(static_cast<int>(4 * s.uniform()) % 4);
    const auto h = build_hamiltonian(sys, rules, d);
    CHECK((h - h.adjoint()).norm() <= 1e-12 * (1.0 + h.norm()));
  }
}

TEST_CASE("zero drive decouples the manifolds with the right gaps") {
  const auto sys = test::default_system();
  const auto h = build_hamiltonian(sys, SelectionRules::ideal(), DriveField{});
  CHECK(h.block<2, 2>(0, 2).norm() == 0.0);
  CHECK(h.block<2, 2>(2, 0).norm() == 0.0);
  CHECK((h(1, 1) - h(0, 0)).real() == doctest::Approx(hz_to_rad(30.2e9)).epsilon(1e-6));
  CHECK((h(3, 3) - h(2, 2)).real() ==
        doctest::Approx(sys.electron_splitting()).epsilon(1e-12));
}

TEST_CASE("H polarization drives exactly the parallel legs") {
  const auto sys = test::default_system();
  DriveField d{1e12, 0.0, Polarization::H};
  const auto h = build_hamiltonian(sys, SelectionRules::ideal(), d);
  CHECK(std::abs(h(kDown, kTrionDown)) > 0.0);
  CHECK(std::abs(h(kUp, kTrionUp)) > 0.0);
  CHECK(std::abs(h(kDown, kTrionUp)) == 0.0);
  CHECK(std::abs(h(kUp, kTrionDown)) == 0.0);
}

TEST_CASE("hamiltonian rejects invalid inputs") {
  const auto sys = test::default_system();
  const auto rules = SelectionRules::ideal();
  CHECK_THROWS_AS(
      build_hamiltonian(sys, rules,
                        DriveField{std::nan(""), 0.0, Polarization::SigmaPlus}),
      DomainError);
}

TEST_CASE("larmor frequency vs bias") {
  auto sys = test::default_system();

  SUBCASE("calibration anchor") {
    CHECK(larmor_frequency(sys, sys.bias_ref) ==
          doctest::Approx(sys.larmor_anchor()).epsilon(1e-15));
  }
  SUBCASE("zero slope means bias independence") {
    sys.larmor_bias_slope = 0.0;
    CHECK(larmor_frequency(sys, 1.2) == larmor_frequency(sys, 2.0));
  }
  SUBCASE("strictly monotone for positive slope") {
    double prev = -1.0;
    for (double v = 1.1; v < 2.1; v += 0.1) {
      const double w = larmor_frequency(sys, v);
      CHECK(w > prev);
      prev = w;
    }
  }
  SUBCASE("default slope gives anti-phase at 2.3 ns for a 0.1 V step") {
    const double dw = larmor_frequency(sys, 1.65) - larmor_frequency(sys, 1.55);
    CHECK(dw * 2.3e-9 == doctest::Approx(std::numbers::pi).epsilon(1e-9));
  }
  SUBCASE("out-of-range bias is rejected") {
    CHECK_THROWS_AS(larmor_frequency(sys, 0.2), RangeError);
    CHECK_THROWS_AS(larmor_frequency(sys, 5.0), RangeError);
  }
}
