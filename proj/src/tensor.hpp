#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynrec {

using Cplx = std::complex<double>;

struct Dims4 {
  std::int64_t coil = 0;
  std::int64_t time = 0;
  std::int64_t row = 0;
  std::int64_t col = 0;

  std::int64_t count() const { return coil * time * row * col; }
  bool operator==(const Dims4 &) const = default;
  std::string str() const;
};

/// Complex 4D array indexed [coil, time, row, col], row-major. Values are
/// held in double precision; the on-disk format is complex-float32 (see
/// save_cplx below).
class ComplexTensor4 {
public:
  ComplexTensor4() = default;
  explicit ComplexTensor4(Dims4 d) : dims_(d), data_(static_cast<std::size_t>(d.count())) {
    if (d.coil <= 0 || d.time <= 0 || d.row <= 0 || d.col <= 0) {
      throw std::invalid_argument("ComplexTensor4: dims must be positive, got " + d.str());
    }
  }

  static ComplexTensor4 zeros(Dims4 d) { return ComplexTensor4(d); }

  const Dims4 &dims() const { return dims_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  std::int64_t index(std::int64_t c, std::int64_t t, std::int64_t r, std::int64_t k) const {
    return ((c * dims_.time + t) * dims_.row + r) * dims_.col + k;
  }
  Cplx &operator()(std::int64_t c, std::int64_t t, std::int64_t r, std::int64_t k) {
    return data_[static_cast<std::size_t>(index(c, t, r, k))];
  }
  const Cplx &operator()(std::int64_t c, std::int64_t t, std::int64_t r, std::int64_t k) const {
    return data_[static_cast<std::size_t>(index(c, t, r, k))];
  }

  std::span<Cplx> samples() { return data_; }
  std::span<const Cplx> samples() const { return data_; }
  Cplx *frame(std::int64_t c, std::int64_t t) { return data_.data() + index(c, t, 0, 0); }
  const Cplx *frame(std::int64_t c, std::int64_t t) const { return data_.data() + index(c, t, 0, 0); }

  bool all_finite() const;

private:
  Dims4 dims_;
  std::vector<Cplx> data_;
};

// Elementwise helpers shared by the solvers; all accumulate in double.
Cplx dot(const ComplexTensor4 &a, const ComplexTensor4 &b);    // sum conj(a)*b
double norm2(const ComplexTensor4 &a);                         // l2 norm
double nmse(const ComplexTensor4 &x, const ComplexTensor4 &ref);
void require_same_dims(const ComplexTensor4 &a, const ComplexTensor4 &b, const char *where);

struct TensorHeader {
  Dims4 dims;
  std::string dtype = "complex-float32";
  std::string order = "coil,time,row,col";
  std::map<std::string, std::string> meta;
};

struct TensorIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FileMissingError : TensorIoError {
  using TensorIoError::TensorIoError;
};
struct HeaderParseError : TensorIoError {
  using TensorIoError::TensorIoError;
};
struct PayloadSizeError : TensorIoError {
  using TensorIoError::TensorIoError;
};

/// Writes `<path>.hdr` (text, one `key: value` per line) and `<path>.cplx`
/// (little-endian interleaved real/imag float32, row-major). Both files are
/// written to temporaries and renamed, so a failed write leaves no partial
/// output behind.
void save_cplx(const ComplexTensor4 &t, const std::string &path,
               const std::map<std::string, std::string> &meta = {});

ComplexTensor4 load_cplx(const std::string &path, TensorHeader *header_out = nullptr);
TensorHeader load_header(const std::string &path);

} // namespace dynrec
