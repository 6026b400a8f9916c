#pragma once

#include "tensor.hpp"

#include <cstdint>
#include <random>

namespace dynrec {

/// Deterministic random source. All draws go through explicit constructions
/// on top of mt19937_64 output so sequences are reproducible independent of
/// the standard library's distribution internals.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double gaussian(); // N(0, 1), Box-Muller

  // Unit-variance complex sample: real and imaginary parts each N(0, 1/2).
  Cplx cgauss() {
    const double g1 = gaussian(), g2 = gaussian();
    return Cplx(g1 * M_SQRT1_2, g2 * M_SQRT1_2);
  }

  void fill_cgauss(ComplexTensor4 &t) {
    for (auto &v : t.samples()) v = cgauss();
  }

  std::uint64_t integer(std::uint64_t bound); // uniform in [0, bound)

private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace dynrec
