#include "fft.hpp"

#include "parallel.hpp"

#include <cmath>
#include <fftw3.h>
#include <map>
#include <mutex>

namespace dynrec {

namespace {

// FFTW planning is not thread-safe; plan execution on distinct buffers is.
// Plans are created once per (rows, cols, sign) with FFTW_ESTIMATE so the
// transform is reproducible run to run.
class PlanCache {
public:
  fftw_plan get(int rows, int cols, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    const auto key = std::make_tuple(rows, cols, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<Cplx> dummy(static_cast<std::size_t>(rows) * cols);
    fftw_plan p = fftw_plan_dft_2d(rows, cols, reinterpret_cast<fftw_complex *>(dummy.data()),
                                   reinterpret_cast<fftw_complex *>(dummy.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

private:
  std::mutex mu_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache &plan_cache() {
  static PlanCache cache;
  return cache;
}

ComplexTensor4 transform(const ComplexTensor4 &t, int sign) {
  const auto d = t.dims();
  const int rows = static_cast<int>(d.row), cols = static_cast<int>(d.col);
  const std::int64_t r0 = d.row / 2, c0 = d.col / 2;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.row) * static_cast<double>(d.col));
  fftw_plan plan = plan_cache().get(rows, cols, sign);

  ComplexTensor4 out(d);
  const std::int64_t n_slices = d.coil * d.time;
  parallel_for(n_slices, [&](std::int64_t s) {
    const Cplx *in_frame = t.frame(s / d.time, s % d.time);
    Cplx *out_frame = out.frame(s / d.time, s % d.time);
    std::vector<Cplx> buf(static_cast<std::size_t>(rows) * cols);
    // ifftshift on input: index floor(n/2) moves to 0.
    for (std::int64_t r = 0; r < d.row; ++r) {
      const std::int64_t rs = (r + r0) % d.row;
      for (std::int64_t k = 0; k < d.col; ++k) {
        buf[r * d.col + k] = in_frame[rs * d.col + (k + c0) % d.col];
      }
    }
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex *>(buf.data()),
                     reinterpret_cast<fftw_complex *>(buf.data()));
    // fftshift on output: DC lands at floor(n/2).
    for (std::int64_t r = 0; r < d.row; ++r) {
      const std::int64_t rs = (r + r0) % d.row;
      for (std::int64_t k = 0; k < d.col; ++k) {
        out_frame[rs * d.col + (k + c0) % d.col] = buf[r * d.col + k] * scale;
      }
    }
  });
  return out;
}

} // namespace

ComplexTensor4 fft2c(const ComplexTensor4 &t) { return transform(t, FFTW_FORWARD); }
ComplexTensor4 ifft2c(const ComplexTensor4 &t) { return transform(t, FFTW_BACKWARD); }

} // namespace dynrec
