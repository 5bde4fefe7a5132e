#ifndef CRASHRE_RNG_HPP_
#define CRASHRE_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace crashre {

using Rng = std::mt19937_64;

// Deterministic child seed for sub-stream `tag` of `master` (chains,
// generator tasks). splitmix64 finalizer over the combined words.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> tags) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(master);
  for (auto t : tags) h = mix(h ^ mix(t));
  return h;
}

}  // namespace crashre

#endif  // CRASHRE_RNG_HPP_
