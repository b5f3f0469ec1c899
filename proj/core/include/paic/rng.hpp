#pragma once

#include <cstdint>
#include <random>

namespace paic {

// Deterministic RNG. Real-valued draws go through inverse-CDF transforms so a
// stream replays identically given the same seed, independent of platform
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (master seed, stream tag, index).
  static Rng substream(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t index);

  std::uint64_t next();
  double uniform01();  // strictly inside (0, 1)
  double normal();
  double normal(double mean, double sd);
  int bernoulli(double p);
  long poisson(double lambda);
  int uniform_int(int n);  // 0 .. n-1

 private:
  std::mt19937_64 gen_;
};

namespace streams {
inline constexpr std::uint64_t bootstrap = 1;
inline constexpr std::uint64_t cohort = 2;
inline constexpr std::uint64_t posterior = 3;
inline constexpr std::uint64_t mim = 4;
inline constexpr std::uint64_t dgp = 5;
inline constexpr std::uint64_t oracle = 6;
}  // namespace streams

}  // namespace paic
