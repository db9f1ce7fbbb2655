#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

// Seed derivation and portable draws. Every stochastic component derives its
// own engine from (seed, salt...) tuples, so datasets, rollout groups and
// evaluation passes are reproducible independent of iteration order or thread
// count. Raw bits are mapped to doubles by hand because the distribution
// classes in <random> are implementation-defined.
namespace aepo::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t a = 0,
                         std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0) {
  return Engine(mix(seed, a, b, c));
}

// Uniform in [0, 1) with 53-bit resolution.
inline double next_unit(Engine& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double next_uniform(Engine& g, double lo, double hi) {
  return lo + (hi - lo) * next_unit(g);
}

// Unbiased integer in [0, n).
inline int next_index(Engine& g, int n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return static_cast<int>(x % bound);
}

// Box-Muller; one variate per call.
inline double next_gaussian(Engine& g) {
  double u = next_unit(g);
  if (u < 1e-300) u = 1e-300;
  const double v = next_unit(g);
  return std::sqrt(-2.0 * std::log(u)) *
         std::cos(2.0 * std::numbers::pi * v);
}

// Inverse-CDF draw from an explicit probability vector (assumed ~normalized).
inline int next_categorical(Engine& g, const std::vector<double>& probs) {
  const double u = next_unit(g);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Fisher-Yates with our own index draws, so shuffles are portable too.
template <class T>
void shuffle(std::vector<T>& items, Engine& g) {
  for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
    std::swap(items[static_cast<std::size_t>(i)],
              items[static_cast<std::size_t>(next_index(g, i + 1))]);
  }
}

}  // namespace aepo::rng
