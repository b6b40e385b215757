#pragma once

#include <random>
#include <string>

namespace ddcbf {

using Rng = std::mt19937_64;

/// Text snapshot of the engine state; round-trips through restore_rng.
std::string rng_state(const Rng& rng);
void restore_rng(Rng& rng, const std::string& state);

/// SplitMix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace ddcbf
