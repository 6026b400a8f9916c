#pragma once

#include "sampling.hpp"
#include "tensor.hpp"

#include <Eigen/Dense>

namespace dynrec {

using CoilMatrix = Eigen::MatrixXcd;
using CoilVector = Eigen::VectorXcd;

/// Logarithms of the coil-space operators that shift a k-space sample by one
/// Cartesian grid cell along kx / ky. grid_size fixes what "one cell" means:
/// delta_k = 2*kmax/grid_size cycles/pixel.
struct GrogOperators {
  std::int64_t n_coil = 0;
  std::int64_t grid_size = 0;
  CoilMatrix log_gx;
  CoilMatrix log_gy;
};

/// Self-calibration from the radial data alone: fits a coil-mixing shift
/// operator per spoke from consecutive readout pairs, takes its matrix log,
/// and solves for the kx/ky logs in least squares across spokes.
GrogOperators calibrate_grog(const RadialAcquisition &acq, std::int64_t grid_size, double ridge);

/// exp(dx*logGx + dy*logGy) applied to one coil vector; dx, dy in grid cells.
CoilVector grog_shift(const CoilVector &sample, double dx, double dy, const GrogOperators &ops);

struct GriddedKSpace {
  ComplexTensor4 grid;             // [coil, 1, grid, grid], fft2c scaling
  std::vector<std::int64_t> hit_count; // [row, col]
  std::int64_t dropped = 0;        // samples with |k| beyond the grid edge

  SamplingMask derived_mask() const;
};

/// Shifts every sample to its nearest grid cell and averages per cell. Grid
/// values are rescaled by 1/grid_size so they line up with fft2c of the
/// underlying image (the raw acquisition is an unnormalised DFT).
GriddedKSpace grid_radial(const RadialAcquisition &acq, const GrogOperators &ops,
                          std::int64_t grid_size);

void save_grog(const GrogOperators &ops, const std::string &path);
GrogOperators load_grog(const std::string &path);

} // namespace dynrec
