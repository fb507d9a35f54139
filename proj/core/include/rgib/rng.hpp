#pragma once

#include <cstdint>
#include <random>

namespace rgib {

// Every random draw in the pipeline derives from one 64-bit master seed.
// A stream is identified by (purpose, index); the generator seed is
// splitmix64(master ^ mix(purpose, index)), so streams are independent and
// adding a new purpose never shifts existing ones.
enum class Stream : std::uint64_t {
  ParamInit = 1,
  SampleNoise = 2,
  Negatives = 3,
  FeatureAttack = 4,
  StructureAttack = 5,
  Sbm = 6,
  EvalSplit = 7,
  EvalAttack = 8,
  Kmeans = 9,
  Test = 10,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream purpose,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(purpose)));
  return splitmix64(h ^ splitmix64(index));
}

inline std::mt19937_64 make_rng(std::uint64_t master, Stream purpose,
                                std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(master, purpose, index));
}

}  // namespace rgib
