#pragma once

#include "encoding.hpp"
#include "tensor.hpp"

namespace dynrec {

enum class PhantomMode { Cardiac, Respiratory };

struct PhantomSpec {
  std::int64_t n_row = 64;
  std::int64_t n_col = 64;
  std::int64_t n_time = 8;
  PhantomMode mode = PhantomMode::Cardiac;
  double amplitude = 0.15; // radius fraction (cardiac) or pixels (respiratory)
  double period = 8.0;     // frames per motion cycle
  std::uint64_t seed = 0;
  double edge_softness = 2.0; // raised-cosine edge width in pixels
  double background = 0.05;   // uniform signal floor under the shapes
};

/// Single frame at a continuous cycle phase in [0, 1); the radial simulator
/// calls this between spokes.
ComplexTensor4 phantom_frame(const PhantomSpec &spec, double phase);

/// n_time frames sampled at phase t/period, t = 0..n_time-1.
ComplexTensor4 dynamic_phantom(const PhantomSpec &spec);

CoilSensitivities synth_coilmaps(std::int64_t n_row, std::int64_t n_col, std::int64_t n_coil,
                                 std::uint64_t seed);

enum class WaveKind { Sine, Sawtooth };
std::vector<double> motion_waveform(std::int64_t n, double period, WaveKind kind,
                                    std::uint64_t seed, double period_jitter = 0.0);

} // namespace dynrec
