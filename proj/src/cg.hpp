#pragma once

#include "encoding.hpp"
#include "tensor.hpp"

#include <string>
#include <vector>

namespace dynrec {

struct CGConfig {
  std::int64_t max_iters = 30;
  double lambda_td = 0.015;
  // Smoothing of the temporal-TV L1: sqrt(|d|^2 + mu^2). Non-positive means
  // auto (1e-6 times the dynamic range of the initial image iterate).
  double smooth_mu = 0.0;
  double initial_step = 1.0;       // probe step for the quadratic-fit line search
  double shrink = 0.5;             // backtracking factor
  double sufficient_decrease = 1e-4;
  std::int64_t max_backtracks = 20;
  double grad_tol = 0.0;           // stop when ||g|| drops below this
  bool circular_time = true;       // wrap last frame to first (cine); off for respiratory
};

struct CGIterRecord {
  std::int64_t iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct CGResult {
  ComplexTensor4 y;
  bool stalled = false; // line search exhausted max_backtracks
  std::vector<CGIterRecord> history;
};

/// Data fidelity plus smoothed temporal total variation:
///   ||M y - y_meas||^2 + lambda_td * sum sqrt(|grad_t u|^2 + mu^2) - offset
/// with u = S^H F^H y and offset chosen so a time-constant image scores 0.
double objective(const ComplexTensor4 &y, const ComplexTensor4 &y_meas, const SamplingMask &m,
                 const CoilSensitivities &sens, const CGConfig &cfg);

/// Wirtinger gradient with respect to conj(y), scaled so the real inner
/// product <g, d> gives the first-order change of the objective.
ComplexTensor4 gradient(const ComplexTensor4 &y, const ComplexTensor4 &y_meas,
                        const SamplingMask &m, const CoilSensitivities &sens, const CGConfig &cfg);

/// Fletcher-Reeves nonlinear CG with a quadratic-interpolating backtracking
/// line search. The direction resets to steepest descent whenever it stops
/// being a descent direction; accepted steps never increase the objective.
CGResult cg_refine(const ComplexTensor4 &y_init, const ComplexTensor4 &y_meas,
                   const SamplingMask &m, const CoilSensitivities &sens, const CGConfig &cfg);

/// CS baseline: cg_refine from the zero-filled initialisation, returned in
/// the image domain.
ComplexTensor4 cs_reconstruct(const ComplexTensor4 &y_meas, const SamplingMask &m,
                              const CoilSensitivities &sens, const CGConfig &cfg);

void write_cg_history_csv(const std::vector<CGIterRecord> &history, const std::string &path);

} // namespace dynrec
