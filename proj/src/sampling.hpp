#pragma once

#include "encoding.hpp"
#include "tensor.hpp"

#include <functional>

namespace dynrec {

struct MaskSpec {
  std::int64_t n_row = 0;
  std::int64_t n_col = 0;
  std::int64_t n_time = 0;
  double accel = 4.0;        // acceleration factor, > 1
  double acs_frac = 0.08;    // fraction of rows in the fully sampled centre
  double density_power = 3.0;
  bool per_frame = true;     // fresh pattern per frame vs one shared pattern
  std::uint64_t seed = 0;
};

/// 1D variable-density row mask. Every frame samples exactly
/// floor(n_row/accel) rows; the centre round(acs_frac*n_row) rows are always
/// included; the rest are drawn without replacement with probability
/// proportional to (1 - |k|/kmax)^density_power.
SamplingMask make_vd_mask(const MaskSpec &spec);

inline constexpr double kGoldenAngle = 1.9416110387254666; // pi*(sqrt(5)-1)/2

std::vector<double> golden_angle_angles(std::int64_t n_spokes);

struct RadialTrajectory {
  std::int64_t n_spokes = 0;
  std::int64_t n_readout = 0;
  std::vector<double> angles; // radians, in [0, pi)
  double kmax = 0.5;          // cycles/pixel at the readout ends

  // Readout sample position along the spoke, in cycles/pixel; index
  // floor(n_readout/2) sits at k = 0.
  double readout_k(std::int64_t r) const {
    return (static_cast<double>(r) - static_cast<double>(n_readout / 2)) *
           (2.0 * kmax / static_cast<double>(n_readout));
  }
};

RadialTrajectory golden_angle_trajectory(std::int64_t n_spokes, std::int64_t n_readout,
                                         double kmax = 0.5);

struct RadialAcquisition {
  RadialTrajectory traj;
  std::int64_t n_coil = 0;
  std::vector<Cplx> samples;      // [coil, spoke, readout]
  std::vector<double> timestamps; // seconds per spoke, monotone

  Cplx &at(std::int64_t c, std::int64_t s, std::int64_t r) {
    return samples[static_cast<std::size_t>((c * traj.n_spokes + s) * traj.n_readout + r)];
  }
  const Cplx &at(std::int64_t c, std::int64_t s, std::int64_t r) const {
    return samples[static_cast<std::size_t>((c * traj.n_spokes + s) * traj.n_readout + r)];
  }
};

/// Instantaneous image (n_coil = 1, n_time = 1) at an acquisition timestamp.
using FrameGenerator = std::function<ComplexTensor4(double t_seconds)>;

/// Simulates a continuous golden-angle acquisition by direct non-uniform DFT
/// of the instantaneous image at each spoke's timestamp:
///   sample[c,i,r] = sum_p S_c(p) x_{t_i}(p) exp(-2*pi*i k_{i,r} . (p - centre))
/// plus optional complex Gaussian noise of standard deviation noise_sd.
RadialAcquisition acquire_radial(const FrameGenerator &frames, const RadialTrajectory &traj,
                                 const CoilSensitivities &sens, double noise_sd,
                                 std::uint64_t seed = 0, double spoke_interval_s = 0.003);

struct MotionSignal {
  std::vector<double> values; // one per spoke
  std::int64_t smooth_len = 1;
};

/// Coil-combined k-space centre magnitude per spoke, then a centred moving
/// average of odd length smooth_len.
MotionSignal estimate_motion_signal(const RadialAcquisition &acq, std::int64_t smooth_len);

enum class BinMode { Fixed, Sliding };

struct BinPlan {
  struct Bin {
    std::int64_t anchor; // spoke index closest to the bin's amplitude centre
    std::vector<std::int64_t> spokes;
  };
  std::vector<Bin> bins;
  std::int64_t window_size = 0;
  std::int64_t n_states = 0;
};

/// Fixed mode: equal-count amplitude bands (disjoint); each bin keeps the
/// window_size spokes nearest its band centre. Sliding mode: n_states anchors
/// on an amplitude grid; each bin keeps the window_size nearest-in-amplitude
/// spokes, overlap permitted. Ties break toward the earlier spoke.
BinPlan bin_spokes(const MotionSignal &signal, std::int64_t n_states, std::int64_t window_size,
                   BinMode mode);

RadialAcquisition sort_bin_to_kspace(const RadialAcquisition &acq,
                                     const std::vector<std::int64_t> &bin);

void save_trajectory_csv(const RadialTrajectory &traj, const std::vector<double> &timestamps,
                         const std::string &path);
void save_binplan(const BinPlan &plan, const std::string &path);
BinPlan load_binplan(const std::string &path);

void save_radial(const RadialAcquisition &acq, const std::string &path);
RadialAcquisition load_radial(const std::string &path);

} // namespace dynrec
