#pragma once
// Deterministic random primitives.
//
// Every stochastic routine in this project draws from the Rng class below,
// which wraps std::mt19937_64 (whose output sequence is fixed by the C++
// standard) and performs all integer-to-real conversions with explicit,
// documented arithmetic.  Given the same seed, the generated stream is
// identical across runs, thread counts, and platforms; floating-point
// results additionally depend only on the libm build used to compile.

#include <cstdint>
#include <cmath>
#include <random>

namespace brw {

// Finalizer of the SplitMix64 generator: a bijective 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Pure, collision-resistant mapping (root_seed, task, replica) -> stream seed.
//
// Byte-exact recipe, so alternate implementations can reproduce streams:
//   h0 = mix64(root_seed + 0x9e3779b97f4a7c15)
//   h1 = mix64(h0 ^ (0xbf58476d1ce4e5b9 * task   + 0x94d049bb133111eb))
//   h2 = mix64(h1 ^ (0x94d049bb133111eb * replica + 0x9e3779b97f4a7c15))
// all arithmetic modulo 2^64; the result is h2.
inline std::uint64_t derive_seed(std::uint64_t root_seed, std::uint64_t task,
                                 std::uint64_t replica) {
  std::uint64_t h = mix64(root_seed + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (0xbf58476d1ce4e5b9ULL * task + 0x94d049bb133111ebULL));
  h = mix64(h ^ (0x94d049bb133111ebULL * replica + 0x9e3779b97f4a7c15ULL));
  return h;
}

// Random stream with fixed conversion algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform on [0,1): the top 53 bits of one 64-bit word scaled by 2^-53.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]: never returns zero, safe as a logarithm argument.
  double uniform_pos() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard exponential by inversion.
  double exponential() { return -std::log(uniform_pos()); }

  // Poisson by Knuth's uniform-product method; 'exp_neg_mean' = exp(-mean),
  // precomputed by the caller.  Cost is O(mean) draws, fine for small means.
  unsigned poisson(double exp_neg_mean) {
    unsigned k = 0;
    double p = uniform();
    while (p > exp_neg_mean) {
      p *= uniform();
      ++k;
    }
    return k;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace brw
