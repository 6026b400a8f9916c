#pragma once

#include "encoding.hpp"
#include "tensor.hpp"

#include <cmath>
#include <memory>
#include <optional>

namespace dynrec {

struct NoiseSchedule; // diffusion.hpp

/// Maps a noisy k-space state (y_t, t) to a noise estimate of the same dims.
class NoisePredictor {
public:
  virtual ~NoisePredictor() = default;
  virtual ComplexTensor4 predict(const ComplexTensor4 &y_t, std::int64_t t) const = 0;
};

/// Test oracle: knows the ground-truth k-space and inverts the forward
/// noising algebraically, so predict_clean recovers y0 exactly.
class OraclePredictor : public NoisePredictor {
public:
  OraclePredictor(ComplexTensor4 y0, const NoiseSchedule &sched);
  ComplexTensor4 predict(const ComplexTensor4 &y_t, std::int64_t t) const override;

private:
  ComplexTensor4 y0_;
  std::vector<double> alpha_bar_;
};

class ZeroPredictor : public NoisePredictor {
public:
  ComplexTensor4 predict(const ComplexTensor4 &y_t, std::int64_t) const override {
    return ComplexTensor4::zeros(y_t.dims());
  }
};

/// Temporal-dynamics model applied to image sequences (any coil count,
/// processed per coil channel).
class XtModel {
public:
  virtual ~XtModel() = default;
  virtual ComplexTensor4 apply(const ComplexTensor4 &x, std::int64_t t) const = 0;
};

class IdentityXt : public XtModel {
public:
  ComplexTensor4 apply(const ComplexTensor4 &x, std::int64_t) const override { return x; }
};

/// Orthonormal DFT along time per pixel, complex soft-threshold with the DC
/// bin exempt, inverse DFT. Exploits temporal-frequency sparsity of periodic
/// motion.
ComplexTensor4 xf_soft_threshold(const ComplexTensor4 &x, double tau);

/// Fixed-threshold shrinkage, or noise-adaptive when given a schedule: the
/// clean estimate extracted at step t carries noise of standard deviation
/// sqrt((1 - alpha_bar_t)/alpha_bar_t) per sample, so the effective
/// threshold tracks it through the reverse process.
class XfSoftThreshold : public XtModel {
public:
  explicit XfSoftThreshold(double tau) : tau_(tau) {}
  XfSoftThreshold(double tau, std::vector<double> alpha_bar, double noise_scale)
      : tau_(tau), alpha_bar_(std::move(alpha_bar)), noise_scale_(noise_scale) {}

  ComplexTensor4 apply(const ComplexTensor4 &x, std::int64_t t) const override {
    double tau = tau_;
    if (!alpha_bar_.empty() && t >= 1 && t < static_cast<std::int64_t>(alpha_bar_.size())) {
      const double ab = alpha_bar_[static_cast<std::size_t>(t)];
      tau += noise_scale_ * std::sqrt((1.0 - ab) / ab);
    }
    return xf_soft_threshold(x, tau);
  }

private:
  double tau_;
  std::vector<double> alpha_bar_;
  double noise_scale_ = 0.0;
};

/// Linear k-t self-consistency kernel: predicts each sample from its
/// (kt x ky x kx x n_coil - 1) neighbourhood across coils, with the
/// same-coil centre tap forced to zero so the identity solution is excluded.
struct KtKernel {
  std::int64_t n_coil = 0;
  std::int64_t kt = 3, ky = 3, kx = 3; // odd
  bool center_excluded = true;
  std::vector<Cplx> taps; // [coil_out, coil_in, kt, ky, kx]

  Cplx &tap(std::int64_t co, std::int64_t ci, std::int64_t dt, std::int64_t dy, std::int64_t dx) {
    return taps[static_cast<std::size_t>((((co * n_coil + ci) * kt + dt) * ky + dy) * kx + dx)];
  }
  const Cplx &tap(std::int64_t co, std::int64_t ci, std::int64_t dt, std::int64_t dy,
                  std::int64_t dx) const {
    return taps[static_cast<std::size_t>((((co * n_coil + ci) * kt + dt) * ky + dy) * kx + dx)];
  }
};

struct KernelDims {
  std::int64_t kt = 3, ky = 3, kx = 3;
};

/// Ridge least-squares fit over all interior positions of the ACS block
/// (margins of half a kernel in every axis). Normal equations accumulate in
/// double precision.
KtKernel fit_kt_kernel(const ComplexTensor4 &y_acs, KernelDims dims, double ridge);

/// Linear interpolation of y by the kernel, zero-padded at the boundary.
/// When blend_mask is given, sampled entries are restored from y afterwards.
ComplexTensor4 apply_kt_kernel(const ComplexTensor4 &y, const KtKernel &k,
                               const SamplingMask *blend_mask = nullptr);

void save_kt_kernel(const KtKernel &k, const std::string &path);
KtKernel load_kt_kernel(const std::string &path);

/// The pluggable pieces consumed by the sampling loop.
struct PriorStack {
  std::shared_ptr<const NoisePredictor> noise;
  std::shared_ptr<const XtModel> xt;
  std::optional<KtKernel> kt;
  bool kt_blend = true; // restore measured entries after kernel application
};

} // namespace dynrec
