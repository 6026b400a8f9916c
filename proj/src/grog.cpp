#include "grog.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

namespace dynrec {

namespace {

// Principal matrix log through the eigendecomposition. Errors out when the
// eigenbasis is too ill-conditioned to trust, or when an eigenvalue sits on
// the negative real axis where the principal branch is discontinuous.
CoilMatrix matrix_log(const CoilMatrix &g, std::int64_t spoke) {
  Eigen::ComplexEigenSolver<CoilMatrix> es(g);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("calibrate_grog: eigensolver failed on spoke " + std::to_string(spoke));
  }
  const CoilVector lam = es.eigenvalues();
  const CoilMatrix v = es.eigenvectors();
  const Eigen::JacobiSVD<CoilMatrix> svd(v);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (smin <= 0.0 || svd.singularValues()(0) / smin > 1e8) {
    throw std::runtime_error("calibrate_grog: defective shift operator on spoke " +
                             std::to_string(spoke));
  }
  CoilVector loglam(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    const double mag = std::abs(lam[i]);
    if (mag < 1e-12) {
      throw std::runtime_error("calibrate_grog: singular shift operator on spoke " +
                               std::to_string(spoke));
    }
    const double arg = std::arg(lam[i]);
    if (std::abs(M_PI - std::abs(arg)) < 1e-6) {
      throw std::runtime_error("calibrate_grog: eigenvalue on the negative real axis (branch cut) "
                               "on spoke " + std::to_string(spoke));
    }
    loglam[i] = Cplx(std::log(mag), arg);
  }
  return v * loglam.asDiagonal() * v.inverse();
}

} // namespace

GrogOperators calibrate_grog(const RadialAcquisition &acq, std::int64_t grid_size, double ridge) {
  const std::int64_t nc = acq.n_coil;
  const std::int64_t nro = acq.traj.n_readout;
  if (acq.traj.n_spokes < 2) throw std::invalid_argument("calibrate_grog: need at least 2 spokes");
  if (nro < nc + 2) throw std::invalid_argument("calibrate_grog: readout too short for coil count");

  // Per-readout-step shift measured in grid cells.
  const double step_cells = (2.0 * acq.traj.kmax / static_cast<double>(nro)) /
                            (2.0 * acq.traj.kmax / static_cast<double>(grid_size));

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  CoilMatrix bx = CoilMatrix::Zero(nc, nc), by = CoilMatrix::Zero(nc, nc);
  for (std::int64_t s = 0; s < acq.traj.n_spokes; ++s) {
    CoilMatrix a(nc, nro - 1), b(nc, nro - 1);
    for (std::int64_t r = 0; r + 1 < nro; ++r) {
      for (std::int64_t c = 0; c < nc; ++c) {
        a(c, r) = acq.at(c, s, r);
        b(c, r) = acq.at(c, s, r + 1);
      }
    }
    const CoilMatrix aah = a * a.adjoint() + ridge * CoilMatrix::Identity(nc, nc);
    const CoilMatrix bah = b * a.adjoint() + ridge * CoilMatrix::Identity(nc, nc);
    const CoilMatrix g = aah.transpose().ldlt().solve(bah.transpose()).transpose();
    const CoilMatrix l = matrix_log(g, s);

    const double dx = step_cells * std::cos(acq.traj.angles[static_cast<std::size_t>(s)]);
    const double dy = step_cells * std::sin(acq.traj.angles[static_cast<std::size_t>(s)]);
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
    bx += dx * l;
    by += dy * l;
  }

  // 2x2 normal equations, shared by every matrix entry.
  const double det = sxx * syy - sxy * sxy;
  if (std::abs(det) < 1e-12 * std::max(sxx, syy) * std::max(sxx, syy) + 1e-300) {
    throw std::runtime_error("calibrate_grog: spoke angles do not span both axes");
  }
  GrogOperators ops;
  ops.n_coil = nc;
  ops.grid_size = grid_size;
  ops.log_gx = (syy * bx - sxy * by) / det;
  ops.log_gy = (sxx * by - sxy * bx) / det;
  return ops;
}

CoilVector grog_shift(const CoilVector &sample, double dx, double dy, const GrogOperators &ops) {
  if (dx == 0.0 && dy == 0.0) return sample;
  const CoilMatrix combined = dx * ops.log_gx + dy * ops.log_gy;
  return combined.exp() * sample;
}

SamplingMask GriddedKSpace::derived_mask() const {
  SamplingMask m;
  m.n_time = 1;
  m.n_row = grid.dims().row;
  m.n_col = grid.dims().col;
  m.m.resize(hit_count.size());
  for (std::size_t i = 0; i < hit_count.size(); ++i) m.m[i] = hit_count[i] > 0 ? 1 : 0;
  return m;
}

GriddedKSpace grid_radial(const RadialAcquisition &acq, const GrogOperators &ops,
                          std::int64_t grid_size) {
  if (ops.grid_size != grid_size) {
    throw std::invalid_argument("grid_radial: operators were calibrated for grid size " +
                                std::to_string(ops.grid_size));
  }
  const std::int64_t nc = acq.n_coil;
  GriddedKSpace out;
  out.grid = ComplexTensor4({nc, 1, grid_size, grid_size});
  out.hit_count.assign(static_cast<std::size_t>(grid_size * grid_size), 0);

  const double cell = 2.0 * acq.traj.kmax / static_cast<double>(grid_size);
  const std::int64_t centre = grid_size / 2;
  CoilVector sample(nc);
  // Accumulate in spoke order so the per-cell mean is deterministic.
  for (std::int64_t s = 0; s < acq.traj.n_spokes; ++s) {
    const double cth = std::cos(acq.traj.angles[static_cast<std::size_t>(s)]);
    const double sth = std::sin(acq.traj.angles[static_cast<std::size_t>(s)]);
    for (std::int64_t r = 0; r < acq.traj.n_readout; ++r) {
      const double rho = acq.traj.readout_k(r);
      const double gx = rho * cth / cell; // position in grid cells from centre
      const double gy = rho * sth / cell;
      const std::int64_t ix = std::llround(gx) + centre;
      const std::int64_t iy = std::llround(gy) + centre;
      if (ix < 0 || ix >= grid_size || iy < 0 || iy >= grid_size) {
        ++out.dropped;
        continue;
      }
      const double dx = static_cast<double>(std::llround(gx)) - gx;
      const double dy = static_cast<double>(std::llround(gy)) - gy;
      for (std::int64_t c = 0; c < nc; ++c) sample[c] = acq.at(c, s, r);
      const CoilVector shifted = grog_shift(sample, dx, dy, ops);
      for (std::int64_t c = 0; c < nc; ++c) out.grid(c, 0, iy, ix) += shifted[c];
      ++out.hit_count[static_cast<std::size_t>(iy * grid_size + ix)];
    }
  }

  // Mean per cell, then rescale to the orthonormal-FFT convention.
  const double scale = 1.0 / static_cast<double>(grid_size);
  for (std::int64_t c = 0; c < nc; ++c) {
    for (std::int64_t iy = 0; iy < grid_size; ++iy) {
      for (std::int64_t ix = 0; ix < grid_size; ++ix) {
        const std::int64_t hits = out.hit_count[static_cast<std::size_t>(iy * grid_size + ix)];
        if (hits > 0) out.grid(c, 0, iy, ix) *= scale / static_cast<double>(hits);
      }
    }
  }
  return out;
}

void save_grog(const GrogOperators &ops, const std::string &path) {
  ComplexTensor4 t({1, 2, ops.n_coil, ops.n_coil});
  for (std::int64_t i = 0; i < ops.n_coil; ++i) {
    for (std::int64_t j = 0; j < ops.n_coil; ++j) {
      t(0, 0, i, j) = ops.log_gx(i, j);
      t(0, 1, i, j) = ops.log_gy(i, j);
    }
  }
  save_cplx(t, path, {{"kind", "grog-operators"}, {"grid_size", std::to_string(ops.grid_size)}});
}

GrogOperators load_grog(const std::string &path) {
  TensorHeader h;
  ComplexTensor4 t = load_cplx(path, &h);
  if (t.dims().time != 2 || t.dims().row != t.dims().col) {
    throw HeaderParseError("not a grog-operator file: " + path);
  }
  GrogOperators ops;
  ops.n_coil = t.dims().row;
  ops.grid_size = std::stoll(h.meta.at("grid_size"));
  ops.log_gx = CoilMatrix(ops.n_coil, ops.n_coil);
  ops.log_gy = CoilMatrix(ops.n_coil, ops.n_coil);
  for (std::int64_t i = 0; i < ops.n_coil; ++i) {
    for (std::int64_t j = 0; j < ops.n_coil; ++j) {
      ops.log_gx(i, j) = t(0, 0, i, j);
      ops.log_gy(i, j) = t(0, 1, i, j);
    }
  }
  return ops;
}

} // namespace dynrec
