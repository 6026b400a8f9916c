#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "phantom.hpp"

using namespace dynrec;

TEST_CASE("zero amplitude freezes the phantom") {
  PhantomSpec spec;
  spec.amplitude = 0.0;
  spec.n_time = 6;
  ComplexTensor4 x = dynamic_phantom(spec);
  for (std::int64_t t = 1; t < 6; ++t) {
    for (std::int64_t r = 0; r < spec.n_row; ++r) {
      for (std::int64_t k = 0; k < spec.n_col; ++k) {
        CHECK(x(0, t, r, k) == x(0, 0, r, k));
      }
    }
  }
}

TEST_CASE("phantom is periodic over one cycle") {
  PhantomSpec spec;
  spec.n_time = 8;
  spec.period = 8;
  ComplexTensor4 a = phantom_frame(spec, 3.0 / 8.0);
  ComplexTensor4 b = phantom_frame(spec, 3.0 / 8.0 + 1.0);
  CHECK(oracle::rel_err(a, b) == 0.0);
}

TEST_CASE("phantom values stay in [0,1] and are deterministic per seed") {
  for (auto mode : {PhantomMode::Cardiac, PhantomMode::Respiratory}) {
    PhantomSpec spec;
    spec.mode = mode;
    spec.seed = 9;
    ComplexTensor4 x = dynamic_phantom(spec);
    for (const auto &v : x.samples()) {
      CHECK(v.imag() == 0.0);
      CHECK(v.real() >= 0.0);
      CHECK(v.real() <= 1.0);
    }
    CHECK(oracle::rel_err(x, dynamic_phantom(spec)) == 0.0);
    PhantomSpec other = spec;
    other.seed = 10;
    CHECK(oracle::rel_err(x, dynamic_phantom(other)) > 0.0);
  }
}

TEST_CASE("respiratory total intensity is frame-invariant to 0.5%") {
  PhantomSpec spec;
  spec.mode = PhantomMode::Respiratory;
  spec.amplitude = 4.0;
  spec.n_time = 10;
  spec.period = 10;
  ComplexTensor4 x = dynamic_phantom(spec);
  std::vector<double> totals;
  for (std::int64_t t = 0; t < spec.n_time; ++t) {
    double s = 0.0;
    for (std::int64_t p = 0; p < spec.n_row * spec.n_col; ++p) s += x.frame(0, t)[p].real();
    totals.push_back(s);
  }
  const double base = totals[0];
  for (double s : totals) CHECK(std::abs(s - base) / base < 0.005);
}

TEST_CASE("coil maps are normalised and deterministic") {
  auto s = synth_coilmaps(32, 32, 6, 123);
  double worst = 0.0;
  for (std::int64_t r = 0; r < 32; ++r) {
    for (std::int64_t k = 0; k < 32; ++k) {
      double ss = 0.0;
      for (std::int64_t c = 0; c < 6; ++c) ss += std::norm(s.at(c, r, k));
      worst = std::max(worst, std::abs(ss - 1.0));
    }
  }
  CHECK(worst < 1e-6);

  auto again = synth_coilmaps(32, 32, 6, 123);
  CHECK(std::equal(s.maps.begin(), s.maps.end(), again.maps.begin()));

  auto single = synth_coilmaps(16, 16, 1, 5);
  for (const auto &v : single.maps) CHECK(std::abs(std::abs(v) - 1.0) < 1e-9);
}

TEST_CASE("motion waveform closes one cycle and is exactly periodic without jitter") {
  auto w = motion_waveform(65, 64.0, WaveKind::Sine, 0);
  CHECK(std::abs(w[0] - w[64]) < 1e-6); // endpoints of one full cycle
  auto w2 = motion_waveform(200, 50.0, WaveKind::Sine, 0);
  for (std::size_t i = 0; i + 50 < w2.size(); ++i) CHECK(std::abs(w2[i] - w2[i + 50]) < 1e-9);
}

TEST_CASE("sawtooth stays within [-1, 1]; jitter breaks exact periodicity") {
  auto w = motion_waveform(300, 37.5, WaveKind::Sawtooth, 3);
  for (double v : w) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  auto j = motion_waveform(300, 50.0, WaveKind::Sine, 3, 0.02);
  bool differs = false;
  for (std::size_t i = 0; i + 50 < j.size(); ++i) {
    if (std::abs(j[i] - j[i + 50]) > 1e-6) differs = true;
  }
  CHECK(differs);
}
