#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dynrec {

namespace {

void check_sizes(const std::vector<double> &x, const std::vector<double> &ref, const char *where) {
  if (x.size() != ref.size() || x.empty()) {
    throw std::invalid_argument(std::string(where) + ": dim mismatch");
  }
}

double mean_of(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double> &v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

} // namespace

double nmse_mag(const std::vector<double> &x, const std::vector<double> &ref) {
  check_sizes(x, ref, "nmse");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - ref[i]) * (x[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  if (den == 0.0) throw std::invalid_argument("nmse: all-zero reference");
  return num / den;
}

double psnr(const std::vector<double> &x, const std::vector<double> &ref, std::int64_t rows,
            std::int64_t cols) {
  check_sizes(x, ref, "psnr");
  if (static_cast<std::size_t>(rows * cols) != x.size()) {
    throw std::invalid_argument("psnr: rows*cols does not match data");
  }
  const double peak = *std::max_element(ref.begin(), ref.end());
  if (peak <= 0.0) throw std::invalid_argument("psnr: all-zero reference");
  // Report the cap exactly when the normalised error vanishes, so the
  // cap <-> nmse < 1e-12 equivalence holds by construction.
  if (nmse_mag(x, ref) < 1e-12) return kPsnrCap;
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += (x[i] - ref[i]) * (x[i] - ref[i]);
  mse /= static_cast<double>(x.size());
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const std::vector<double> &x, const std::vector<double> &ref, std::int64_t rows,
            std::int64_t cols) {
  check_sizes(x, ref, "ssim");
  constexpr std::int64_t win = 7;
  if (rows < win || cols < win) throw std::invalid_argument("ssim: frame smaller than the window");
  const double L = *std::max_element(ref.begin(), ref.end());
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);
  const double n = static_cast<double>(win * win);

  double acc = 0.0;
  std::int64_t count = 0;
  for (std::int64_t r = 0; r + win <= rows; ++r) {
    for (std::int64_t c = 0; c + win <= cols; ++c) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::int64_t i = 0; i < win; ++i) {
        for (std::int64_t j = 0; j < win; ++j) {
          const double a = x[static_cast<std::size_t>((r + i) * cols + c + j)];
          const double b = ref[static_cast<std::size_t>((r + i) * cols + c + j)];
          sx += a;
          sy += b;
          sxx += a * a;
          syy += b * b;
          sxy += a * b;
        }
      }
      const double mx = sx / n, my = sy / n;
      const double vx = sxx / n - mx * mx;
      const double vy = syy / n - my * my;
      const double cov = sxy / n - mx * my;
      acc += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

double tenengrad(const std::vector<double> &x, std::int64_t rows, std::int64_t cols) {
  if (rows < 3 || cols < 3) throw std::invalid_argument("tenengrad: need at least 3x3");
  const double peak = *std::max_element(x.begin(), x.end());
  const double inv = peak > 0.0 ? 1.0 / peak : 1.0;
  auto at = [&](std::int64_t r, std::int64_t c) {
    return x[static_cast<std::size_t>(r * cols + c)] * inv;
  };
  double acc = 0.0;
  for (std::int64_t r = 1; r + 1 < rows; ++r) {
    for (std::int64_t c = 1; c + 1 < cols; ++c) {
      const double gx = (at(r - 1, c + 1) + 2 * at(r, c + 1) + at(r + 1, c + 1)) -
                        (at(r - 1, c - 1) + 2 * at(r, c - 1) + at(r + 1, c - 1));
      const double gy = (at(r + 1, c - 1) + 2 * at(r + 1, c) + at(r + 1, c + 1)) -
                        (at(r - 1, c - 1) + 2 * at(r - 1, c) + at(r - 1, c + 1));
      acc += gx * gx + gy * gy;
    }
  }
  return acc / static_cast<double>((rows - 2) * (cols - 2));
}

std::vector<double> magnitude_frame(const ComplexTensor4 &t, std::int64_t frame) {
  const auto d = t.dims();
  std::vector<double> out(static_cast<std::size_t>(d.row * d.col));
  const Cplx *f = t.frame(0, frame);
  for (std::int64_t p = 0; p < d.row * d.col; ++p) out[static_cast<std::size_t>(p)] = std::abs(f[p]);
  return out;
}

MetricReport compute_metrics(const ComplexTensor4 &x, const ComplexTensor4 &ref) {
  require_same_dims(x, ref, "compute_metrics");
  if (x.dims().coil != 1) throw std::invalid_argument("compute_metrics: expects n_coil = 1 images");
  MetricReport r;
  const auto d = x.dims();
  for (std::int64_t t = 0; t < d.time; ++t) {
    const auto mx = magnitude_frame(x, t);
    const auto mr = magnitude_frame(ref, t);
    r.psnr.push_back(psnr(mx, mr, d.row, d.col));
    r.ssim.push_back(ssim(mx, mr, d.row, d.col));
    r.nmse.push_back(nmse_mag(mx, mr));
    r.tenengrad.push_back(tenengrad(mx, d.row, d.col));
  }
  r.psnr_mean = mean_of(r.psnr);
  r.psnr_std = std_of(r.psnr, r.psnr_mean);
  r.ssim_mean = mean_of(r.ssim);
  r.ssim_std = std_of(r.ssim, r.ssim_mean);
  r.nmse_mean = mean_of(r.nmse);
  r.nmse_std = std_of(r.nmse, r.nmse_mean);
  r.tenengrad_mean = mean_of(r.tenengrad);
  r.tenengrad_std = std_of(r.tenengrad, r.tenengrad_mean);
  return r;
}

void write_metrics_csv(const MetricReport &r, const std::string &path) {
  std::ofstream os(path);
  if (!os) throw TensorIoError("cannot open for write: " + path);
  os << "frame,psnr,ssim,nmse,tenengrad\n";
  char line[160];
  for (std::size_t t = 0; t < r.psnr.size(); ++t) {
    std::snprintf(line, sizeof line, "%zu,%.8g,%.8g,%.8g,%.8g\n", t, r.psnr[t], r.ssim[t],
                  r.nmse[t], r.tenengrad[t]);
    os << line;
  }
  std::snprintf(line, sizeof line, "mean,%.8g,%.8g,%.8g,%.8g\n", r.psnr_mean, r.ssim_mean,
                r.nmse_mean, r.tenengrad_mean);
  os << line;
  std::snprintf(line, sizeof line, "std,%.8g,%.8g,%.8g,%.8g\n", r.psnr_std, r.ssim_std, r.nmse_std,
                r.tenengrad_std);
  os << line;
}

} // namespace dynrec
