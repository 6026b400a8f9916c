#pragma once

#include "tensor.hpp"

#include <string>
#include <vector>

namespace dynrec {

inline constexpr double kPsnrCap = 99.0;

// Frame-level metrics on magnitude images (row-major, rows x cols).
double psnr(const std::vector<double> &x, const std::vector<double> &ref, std::int64_t rows,
            std::int64_t cols);
double ssim(const std::vector<double> &x, const std::vector<double> &ref, std::int64_t rows,
            std::int64_t cols);
double nmse_mag(const std::vector<double> &x, const std::vector<double> &ref);
double tenengrad(const std::vector<double> &x, std::int64_t rows, std::int64_t cols);

struct MetricReport {
  std::vector<double> psnr, ssim, nmse, tenengrad; // per frame
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
  double nmse_mean = 0, nmse_std = 0;
  double tenengrad_mean = 0, tenengrad_std = 0;
};

std::vector<double> magnitude_frame(const ComplexTensor4 &t, std::int64_t frame);

/// Frame-by-frame metrics of |x| against |ref|; inputs are image sequences
/// with n_coil = 1.
MetricReport compute_metrics(const ComplexTensor4 &x, const ComplexTensor4 &ref);

void write_metrics_csv(const MetricReport &r, const std::string &path);

} // namespace dynrec
