#pragma once

#include <cstdint>
#include <initializer_list>

namespace qdspin::rng {

// splitmix64 step; also used to key sub-streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// xoshiro256++ stream. Streams are derived, never shared: every sweep point
// (and direction, and batch) gets its own stream keyed on the run seed plus a
// path of indices, so results do not depend on thread scheduling.
class Stream {
 public:
  Stream() { reseed(0); }
  explicit Stream(std::uint64_t seed) { reseed(seed); }

  // Derive a child stream from seed and a key path, e.g. {kind, dir, point}.
  static Stream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal(double mean = 0.0, double sigma = 1.0);
  long binomial(long n, double p);
  long poisson(double mean);

 private:
  void reseed(std::uint64_t seed);
  std::uint64_t s_[4];
};

}  // namespace qdspin::rng
