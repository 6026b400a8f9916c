#include "image_export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace dynrec {

void write_pgm(const std::string &path, const std::vector<double> &pixels, std::int64_t rows,
               std::int64_t cols) {
  if (static_cast<std::size_t>(rows * cols) != pixels.size()) {
    throw std::invalid_argument("write_pgm: rows*cols does not match data");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw TensorIoError("cannot open for write: " + path);
  os << "P5\n" << cols << " " << rows << "\n255\n";
  std::vector<unsigned char> bytes(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = std::clamp(pixels[i], 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  os.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void export_frames(const ComplexTensor4 &x, const std::string &prefix) {
  const auto d = x.dims();
  double peak = 0.0;
  for (const auto &v : x.samples()) peak = std::max(peak, std::abs(v));
  const double inv = peak > 0.0 ? 1.0 / peak : 1.0;
  for (std::int64_t t = 0; t < d.time; ++t) {
    std::vector<double> frame(static_cast<std::size_t>(d.row * d.col));
    const Cplx *f = x.frame(0, t);
    for (std::int64_t p = 0; p < d.row * d.col; ++p) {
      frame[static_cast<std::size_t>(p)] = std::abs(f[p]) * inv;
    }
    char name[32];
    std::snprintf(name, sizeof name, "_f%03ld.pgm", t);
    write_pgm(prefix + name, frame, d.row, d.col);
  }
}

std::vector<double> xt_profile(const ComplexTensor4 &x, ProfileAxis axis, std::int64_t index,
                               std::int64_t *rows, std::int64_t *cols) {
  const auto d = x.dims();
  const std::int64_t width = axis == ProfileAxis::Row ? d.col : d.row;
  const std::int64_t limit = axis == ProfileAxis::Row ? d.row : d.col;
  if (index < 0 || index >= limit) throw std::out_of_range("xt_profile: index out of range");
  std::vector<double> out(static_cast<std::size_t>(d.time * width));
  double peak = 0.0;
  for (std::int64_t t = 0; t < d.time; ++t) {
    for (std::int64_t p = 0; p < width; ++p) {
      const Cplx v = axis == ProfileAxis::Row ? x(0, t, index, p) : x(0, t, p, index);
      const double mag = std::abs(v);
      out[static_cast<std::size_t>(t * width + p)] = mag;
      peak = std::max(peak, mag);
    }
  }
  if (peak > 0.0) {
    for (auto &v : out) v /= peak;
  }
  *rows = d.time;
  *cols = width;
  return out;
}

} // namespace dynrec
