#pragma once

#include <cstdint>
#include <random>

namespace tdlab {

/// Seed-deterministic generator used by every simulation in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniform reals are built from the top 53 bits of one engine draw,
/// so a given seed replays the same trajectory on every conforming platform
/// (std::uniform_real_distribution is implementation-defined and is not used).
class Rng {
 public:
  using Engine = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Independent child stream, e.g. for the second copy of a lock-step pair.
  Rng split() { return Rng(splitmix(engine_())); }

  std::uint64_t seed() const { return seed_; }

  static constexpr const char* algorithm() { return "mt19937_64"; }

 private:
  static std::uint64_t splitmix(std::uint64_t x);

  Engine engine_;
  std::uint64_t seed_;
};

}  // namespace tdlab
