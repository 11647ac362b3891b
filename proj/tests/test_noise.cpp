#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "qdspin/errors.hpp"
#include "qdspin/fitting.hpp"
#include "qdspin/noise.hpp"
#include "qdspin/rng.hpp"
#include "qdspin/units.hpp"

using namespace qdspin;
using namespace qdspin::units;
using namespace qdspin::noise;

namespace {
NoiseModel default_noise() { return config::RunConfig::defaults().noise_model(); }
}  // namespace

TEST_CASE("quasi-static sampling") {
  NoiseModel m;

  SUBCASE("zero width always returns zero") {
    m.sigma_quasistatic = 0.0;
    rng::Stream s(1);
    for (int i = 0; i < 100; ++i) CHECK(sample_quasistatic(m, s) == 0.0);
  }
  SUBCASE("sample mean sits within the estimator band") {
    m = default_noise();
    rng::Stream s(2);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = sample_quasistatic(m, s);
      sum += d;
      sum2 += d * d;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    CHECK(std::abs(mean) < 4.0 * m.sigma_quasistatic / std::sqrt(n));
    CHECK(sd == doctest::Approx(m.sigma_quasistatic).epsilon(0.02));
  }
  SUBCASE("default sigma corresponds to T2* = 2.3 ns") {
    m = default_noise();
    CHECK(m.t2_star() == doctest::Approx(2.3e-9).epsilon(1e-9));
    CHECK(m.sigma_quasistatic ==
          doctest::Approx(std::sqrt(2.0) / 2.3e-9).epsilon(1e-12));
  }
}

TEST_CASE("free-induction envelope values") {
  CHECK(fid_envelope(0.0, 2.3e-9) == 1.0);
  CHECK(fid_envelope(2.3e-9, 2.3e-9) == doctest::Approx(std::exp(-1.0)));
  CHECK_THROWS_AS(fid_envelope(-1.0, 2.3e-9), DomainError);
}

TEST_CASE("echo envelope values") {
  CHECK(echo_envelope(0.0, 1.1e-6) == 1.0);
  CHECK(echo_envelope(1.1e-6, 1.1e-6) == doctest::Approx(std::exp(-1.0)));
  // 2T = 130 ns on the 1.1 us scale
  CHECK(echo_envelope(130e-9, 1.1e-6) == doctest::Approx(0.888537).epsilon(1e-4));
  CHECK_THROWS_AS(echo_envelope(-1.0, 1.1e-6), DomainError);
}

TEST_CASE("ensemble-averaged fringes reproduce the Gaussian envelope") {
  const auto m = default_noise();
  rng::Stream s(3);
  const int draws = 20000;
  std::vector<double> deltas(draws);
  for (auto& d : deltas) d = sample_quasistatic(m, s);

  std::vector<double> ts, amps;
  for (int i = 1; i <= 16; ++i) {
    const double t = 0.3e-9 * i;
    double c = 0.0, q = 0.0;
    for (double d : deltas) {
      c += std::cos(d * t);
      q += std::sin(d * t);
    }
    ts.push_back(t);
    amps.push_back(std::hypot(c, q) / draws);
    // direct comparison against the closed form, within MC error (95%)
    const double expect = fid_envelope(t, m.t2_star());
    CHECK(std::abs(amps.back() - expect) < 2.0 / std::sqrt(static_cast<double>(draws)) + 2e-3);
  }

  const auto fit = fitting::fit_gaussian_decay(ts, amps);
  REQUIRE(fit.converged);
  CHECK(fit.at("t2star") == doctest::Approx(2.3e-9).epsilon(0.05));
}

TEST_CASE("a Hahn echo cancels every single quasi-static draw") {
  // ideal pulses, one draw per shot: fringe amplitude over the fine delay is
  // unity for any offset
  rng::Stream s(5);
  const auto m = default_noise();
  const double omega = test::default_system().hole_splitting();
  const double big_t = 65e-9;

  auto rx = [](double a) {
    Eigen::Matrix2cd u;
    u << std::cos(a / 2), std::complex<double>(0, -std::sin(a / 2)),
        std::complex<double>(0, -std::sin(a / 2)), std::cos(a / 2);
    return u;
  };
  auto rz = [](double phi) {
    Eigen::Matrix2cd u = Eigen::Matrix2cd::Zero();
    u(0, 0) = std::exp(std::complex<double>(0, 0.5 * phi));
    u(1, 1) = std::exp(std::complex<double>(0, -0.5 * phi));
    return u;
  };

  for (int i = 0; i < 50; ++i) {
    const double delta = 10.0 * sample_quasistatic(m, s);  // even huge draws
    const double w = omega + delta;
    double lo = 1.0, hi = 0.0;
    for (int k = 0; k < 176; ++k) {
      const double fine = k * 0.2e-12;
      Eigen::Vector2cd psi(1.0, 0.0);
      psi = rx(std::numbers::pi / 2) * psi;
      psi = rz(w * big_t) * psi;
      psi = rx(std::numbers::pi) * psi;
      psi = rz(w * (big_t + fine)) * psi;
      psi = rx(std::numbers::pi / 2) * psi;
      const double p_up = std::norm(psi(1));
      lo = std::min(lo, p_up);
      hi = std::max(hi, p_up);
    }
    CHECK(hi > 0.999);
    CHECK(lo < 0.001);
  }
}

TEST_CASE("overhauser updates") {
  OverhauserState st;
  st.gain = 1e8;
  st.kappa = 1.0;
  st.relaxation_rate = 0.5;
  st.bound = 1e9;

  SUBCASE("zero gain decays toward zero") {
    st.gain = 0.0;
    st.shift = 1e8;
    const auto next = update_overhauser(st, 1.0, 0.1);
    CHECK(next.shift == doctest::Approx(1e8 * (1.0 - 0.5 * 0.1)));
  }
  SUBCASE("infinite suppression is the identity up to relaxation") {
    st.kappa = 1e300;
    st.shift = 5e7;
    const auto next = update_overhauser(st, 1.0, 0.1);
    CHECK(next.shift == doctest::Approx(5e7 * (1.0 - 0.05)).epsilon(1e-12));
  }
  SUBCASE("bound clamps the shift") {
    st.shift = 0.99e9;
    auto next = update_overhauser(st, 100.0, 1.0);
    CHECK(next.shift <= st.bound);
    next = update_overhauser(st, -1000.0, 1.0);
    CHECK(next.shift >= -st.bound);
  }
  SUBCASE("non-positive dwell is rejected") {
    CHECK_THROWS_AS(update_overhauser(st, 1.0, 0.0), DomainError);
  }
}

TEST_CASE("effective larmor is additive") {
  const auto sys = test::default_system();
  NoiseModel m;
  OverhauserState over;
  over.shift = 3.7e8;

  const double base = effective_larmor(sys, m, {}, sys.bias_ref, 0.0, 0.0);
  CHECK(base == doctest::Approx(hz_to_rad(30.2e9)).epsilon(1e-6));
  CHECK(effective_larmor(sys, m, over, sys.bias_ref, 0.0, 0.0) ==
        doctest::Approx(base + over.shift));
  CHECK(effective_larmor(sys, m, over, sys.bias_ref, 0.0, 1.1e8) ==
        doctest::Approx(base + over.shift + 1.1e8));
}

TEST_CASE("bias modulation phase integral matches quadrature") {
  const auto sys = test::default_system();
  NoiseModel m;
  m.bias_modulation.amplitude = 0.01;
  m.bias_modulation.frequency = 1e6;
  rng::Stream s(13);
  for (int i = 0; i < 20; ++i) {
    const double t0 = 1e-6 * s.uniform();
    const double t1 = t0 + 2e-6 * s.uniform();
    const double phase0 = kTwoPi * s.uniform();
    const double closed = modulation_phase_integral(sys, m, t0, t1, phase0);
    // trapezoid
    const int n = 20000;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const double t = t0 + (t1 - t0) * (k + 0.5) / n;
      acc += sys.larmor_bias_slope * m.bias_modulation.amplitude *
             std::sin(kTwoPi * m.bias_modulation.frequency * t + phase0);
    }
    acc *= (t1 - t0) / n;
    CHECK(closed == doctest::Approx(acc).epsilon(1e-5));
  }
}

TEST_CASE("optical detuning sampling") {
  NoiseModel m;
  SUBCASE("zero width returns zero") {
    rng::Stream s(7);
    CHECK(optical_detuning_sample(m, s) == 0.0);
  }
  SUBCASE("sample std matches the configured FWHM") {
    m.optical_linewidth_fwhm = ghz_to_rad(6.7);
    rng::Stream s(8);
    const int n = 200000;
    double sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = optical_detuning_sample(m, s);
      sum2 += d * d;
    }
    const double sd = std::sqrt(sum2 / n);
    CHECK(sd == doctest::Approx(fwhm_to_sigma(m.optical_linewidth_fwhm)).epsilon(0.02));
  }
}
