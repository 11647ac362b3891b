#include "qdspin/rng.hpp"

#include <cmath>

#include "qdspin/errors.hpp"
#include "qdspin/units.hpp"

namespace qdspin::rng {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

double log_factorial(double n) { return std::lgamma(n + 1.0); }

}  // namespace

void Stream::reseed(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

Stream Stream::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t x = seed;
  std::uint64_t h = splitmix64(x);
  for (std::uint64_t key : path) {
    x ^= key + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h = splitmix64(x);
  }
  return Stream(h);
}

std::uint64_t Stream::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Stream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::normal(double mean, double sigma) {
  // Box-Muller; u1 shifted away from zero.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(units::kTwoPi * u2);
  return mean + sigma * z;
}

long Stream::binomial(long n, double p) {
  if (n < 0) throw DomainError("binomial: negative trial count");
  if (p < 0.0 || p > 1.0) throw DomainError("binomial: probability outside [0,1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;

  if (n <= 256) {
    long k = 0;
    for (long i = 0; i < n; ++i)
      if (uniform() < p) ++k;
    return k;
  }

  // Inversion around the mode; O(sigma) expected walk length.
  const double q = 1.0 - p;
  const long mode = static_cast<long>(std::floor((n + 1) * p));
  const double log_pm = log_factorial(n) - log_factorial(mode) - log_factorial(n - mode) +
                        mode * std::log(p) + (n - mode) * std::log(q);
  const double pm = std::exp(log_pm);

  double u = uniform();
  double cum = pm;
  if (u < cum) return mode;
  u -= cum;

  double lo_p = pm, hi_p = pm;
  long lo = mode, hi = mode;
  while (lo > 0 || hi < n) {
    if (hi < n) {
      hi_p *= (static_cast<double>(n - hi) / (hi + 1)) * (p / q);
      ++hi;
      if (u < hi_p) return hi;
      u -= hi_p;
    }
    if (lo > 0) {
      lo_p *= (static_cast<double>(lo) / (n - lo + 1)) * (q / p);
      --lo;
      if (u < lo_p) return lo;
      u -= lo_p;
    }
  }
  return mode;  // numerically exhausted tail mass
}

long Stream::poisson(double mean) {
  if (mean < 0.0) throw DomainError("poisson: negative mean");
  if (mean == 0.0) return 0;

  if (mean < 30.0) {
    const double limit = std::exp(-mean);
    long k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  const long mode = static_cast<long>(std::floor(mean));
  const double pm = std::exp(mode * std::log(mean) - mean - log_factorial(mode));
  double u = uniform();
  double cum = pm;
  if (u < cum) return mode;
  u -= cum;

  double lo_p = pm, hi_p = pm;
  long lo = mode, hi = mode;
  while (lo > 0 || hi < mode + 2000) {
    hi_p *= mean / (hi + 1);
    ++hi;
    if (u < hi_p) return hi;
    u -= hi_p;
    if (lo > 0) {
      lo_p *= static_cast<double>(lo) / mean;
      --lo;
      if (u < lo_p) return lo;
      u -= lo_p;
    }
  }
  return mode;
}

}  // namespace qdspin::rng
