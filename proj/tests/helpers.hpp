#pragma once

#include "qdspin/config.hpp"
#include "qdspin/levels.hpp"
#include "qdspin/units.hpp"

namespace qdspin::test {

// default dot: g factors back-computed from the 8 T splittings
inline levels::SpinSystem default_system() { return config::RunConfig::defaults().spin_system(); }

inline double g_for_splitting(double f_hz, double b_tesla) {
  return units::hz_to_rad(f_hz) * units::kHbar / (units::kBohrMagneton * b_tesla);
}

}  // namespace qdspin::test
