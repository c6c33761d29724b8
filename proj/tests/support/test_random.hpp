#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Bit-stable uniforms/normals for property suites: built from raw mt19937_64
// output so results do not depend on the standard library's distribution
// implementations.
namespace hybridcert::testsupport {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) {  // [0, n)
    return std::min(n - 1, static_cast<int>(uniform() * n));
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace hybridcert::testsupport
