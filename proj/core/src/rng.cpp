#include "paic/rng.hpp"

#include <cmath>

#include "paic/errors.hpp"
#include "paic/stats.hpp"

namespace paic {

namespace {

std::mt19937_64 make_engine(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : gen_(make_engine(seed, 0, 0)) {}

Rng Rng::substream(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t index) {
  Rng r(0);
  r.gen_ = make_engine(master_seed, stream, index);
  return r;
}

std::uint64_t Rng::next() { return gen_(); }

double Rng::uniform01() {
  // 53-bit mantissa, offset by half an ulp to stay strictly inside (0, 1).
  return (static_cast<double>(gen_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double Rng::normal() { return stats::norm_quantile(uniform01()); }

double Rng::normal(double mean, double sd) { return mean + sd * normal(); }

int Rng::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw numeric_error("bernoulli: p outside [0,1]");
  return uniform01() < p ? 1 : 0;
}

long Rng::poisson(double lambda) {
  if (!(lambda >= 0.0)) throw numeric_error("poisson: negative rate");
  long total = 0;
  // Additivity keeps Knuth's product method inside exp() range.
  while (lambda > 60.0) {
    lambda -= 60.0;
    const double limit = std::exp(-60.0);
    double prod = 1.0;
    long k = 0;
    do {
      ++k;
      prod *= uniform01();
    } while (prod > limit);
    total += k - 1;
  }
  if (lambda > 0.0) {
    const double limit = std::exp(-lambda);
    double prod = 1.0;
    long k = 0;
    do {
      ++k;
      prod *= uniform01();
    } while (prod > limit);
    total += k - 1;
  }
  return total;
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw numeric_error("uniform_int: n must be positive");
  // Multiply-shift map of a 64-bit draw onto 0..n-1.
  const unsigned __int128 wide = static_cast<unsigned __int128>(gen_()) * static_cast<unsigned __int128>(n);
  return static_cast<int>(wide >> 64);
}

}  // namespace paic
