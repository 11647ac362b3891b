#pragma once

#include <numbers>

namespace qdspin::units {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// CODATA 2018
inline constexpr double kBohrMagneton = 9.2740100783e-24;  // J/T
inline constexpr double kHbar = 1.054571817e-34;           // J s

inline constexpr double kNs = 1e-9;
inline constexpr double kPs = 1e-12;
inline constexpr double kUs = 1e-6;

// Config files carry ordinary frequencies in Hz; everything internal is rad/s.
constexpr double hz_to_rad(double f_hz) { return kTwoPi * f_hz; }
constexpr double rad_to_hz(double w) { return w / kTwoPi; }
constexpr double ghz_to_rad(double f_ghz) { return kTwoPi * 1e9 * f_ghz; }
constexpr double rad_to_ghz(double w) { return w / (kTwoPi * 1e9); }

// Gaussian FWHM <-> standard deviation
constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)
constexpr double fwhm_to_sigma(double fwhm) { return fwhm / kFwhmPerSigma; }
constexpr double sigma_to_fwhm(double sigma) { return sigma * kFwhmPerSigma; }

}  // namespace qdspin::units
