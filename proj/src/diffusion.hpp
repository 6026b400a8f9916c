#pragma once

#include "cg.hpp"
#include "encoding.hpp"
#include "priors.hpp"
#include "tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dynrec {

/// Per-step noising tables, index 0..T with alpha_bar[0] = 1. sigma is the
/// reverse-transition standard deviation sigma_t^2 =
/// (1 - alpha_bar[t-1]) / (1 - alpha_bar[t]) * beta[t].
struct NoiseSchedule {
  std::int64_t T = 0;
  std::vector<double> beta;      // [0..T], beta[0] unused
  std::vector<double> alpha;     // [0..T], alpha[0] unused
  std::vector<double> alpha_bar; // [0..T], alpha_bar[0] = 1
  std::vector<double> sigma;     // [0..T], sigma[0] unused

  void validate() const;
};

NoiseSchedule cosine_schedule(std::int64_t T);

/// y_t = sqrt(alpha_bar_t) y0 + sqrt(1 - alpha_bar_t) eps.
ComplexTensor4 q_sample(const ComplexTensor4 &y0, std::int64_t t, const ComplexTensor4 &eps,
                        const NoiseSchedule &sched);

/// M (lambda y_meas + (1-lambda) y_t) + (1-M) y_t. Unsampled entries are
/// passed through untouched.
ComplexTensor4 data_consistency(const ComplexTensor4 &y_t, const ComplexTensor4 &y_meas,
                                const SamplingMask &m, double lambda_t);

/// (y_t - sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_bar_t).
ComplexTensor4 predict_clean(const ComplexTensor4 &y_t, const ComplexTensor4 &eps_hat,
                             std::int64_t t, const NoiseSchedule &sched);

/// Posterior-mean recombination toward step t-1 plus sigma_t z.
ComplexTensor4 reverse_step(const ComplexTensor4 &y_t, const ComplexTensor4 &y0_refined,
                            std::int64_t t, const ComplexTensor4 &z, const NoiseSchedule &sched);

enum class DCMode { Constant, LinearRamp };

struct DCConfig {
  DCMode mode = DCMode::Constant;
  double lambda = 1.0; // constant value, or the t=1 endpoint of the ramp

  // LinearRamp runs lambda from lambda at t=1 up to 1 at t=T.
  double lambda_at(std::int64_t t, std::int64_t T) const {
    if (mode == DCMode::Constant || T <= 1) return lambda;
    return lambda + (1.0 - lambda) * static_cast<double>(t - 1) / static_cast<double>(T - 1);
  }
};

struct StepDiag {
  std::int64_t step = 0;  // t of the reverse step just executed
  double objective = 0.0; // CG objective of the refined clean estimate
  double nmse = -1.0;     // vs reference, when one was provided
};

struct SampleOptions {
  bool cg_enabled = true;
  CGConfig cg;
  bool terminal_dc = true;
  std::uint64_t seed = 0;
  const ComplexTensor4 *reference = nullptr; // ground-truth k-space for diagnostics
  bool collect_diagnostics = false;
};

struct SampleResult {
  ComplexTensor4 y0;
  std::vector<StepDiag> diags;
};

/// Full reverse-diffusion reconstruction: starting from Gaussian noise, each
/// step applies data consistency, extracts the clean estimate via the noise
/// predictor, passes it through the x-t and k-t priors and the CG refiner,
/// then recombines toward step t-1.
SampleResult sample(const ComplexTensor4 &y_meas, const SamplingMask &m,
                    const CoilSensitivities &sens, const PriorStack &priors,
                    const NoiseSchedule &sched, const DCConfig &dc, const SampleOptions &opts);

struct TrainingLosses {
  double l_noise = 0.0;
  double l_xt = 0.0;
  double l_kt = 0.0;
  double total = 0.0;
};

/// One evaluation of the joint training objective at step t: noise-prediction
/// residual, x-t reconstruction residual of the prior-processed clean
/// estimate, and k-t self-consistency residual on the ACS rows.
TrainingLosses training_losses(const ComplexTensor4 &y0, const SamplingMask &m, std::int64_t t,
                               const ComplexTensor4 &eps, const PriorStack &priors,
                               const NoiseSchedule &sched, const DCConfig &dc, double lambda_xt,
                               double lambda_kt);

/// ACS selector P: the fully sampled centre rows, all frames, all coils.
ComplexTensor4 extract_acs(const ComplexTensor4 &y, const SamplingMask &m);

void write_diagnostics_csv(const std::vector<StepDiag> &diags, const std::string &path);

} // namespace dynrec
