#pragma once

#include "tensor.hpp"

#include <optional>

namespace dynrec {

/// Per-coil complex spatial weights, shared across frames. Maps are expected
/// to satisfy sum_c |S_c|^2 = 1 (see phantom::synth_coilmaps).
struct CoilSensitivities {
  std::int64_t n_coil = 0;
  std::int64_t n_row = 0;
  std::int64_t n_col = 0;
  std::vector<Cplx> maps; // [coil, row, col]

  Cplx &at(std::int64_t c, std::int64_t r, std::int64_t k) {
    return maps[static_cast<std::size_t>((c * n_row + r) * n_col + k)];
  }
  const Cplx &at(std::int64_t c, std::int64_t r, std::int64_t k) const {
    return maps[static_cast<std::size_t>((c * n_row + r) * n_col + k)];
  }
};

/// Binary Cartesian sampling pattern, one plane per frame, broadcast over
/// coils. acs_first/acs_count describe the fully sampled centre-row band
/// when one exists (Cartesian variable-density masks); GROG-derived masks
/// leave them unset.
struct SamplingMask {
  std::int64_t n_time = 0;
  std::int64_t n_row = 0;
  std::int64_t n_col = 0;
  std::vector<std::uint8_t> m; // [time, row, col], values 0/1
  std::int64_t acs_first = -1;
  std::int64_t acs_count = 0;

  std::uint8_t &at(std::int64_t t, std::int64_t r, std::int64_t k) {
    return m[static_cast<std::size_t>((t * n_row + r) * n_col + k)];
  }
  std::uint8_t at(std::int64_t t, std::int64_t r, std::int64_t k) const {
    return m[static_cast<std::size_t>((t * n_row + r) * n_col + k)];
  }
  const std::uint8_t *frame(std::int64_t t) const { return m.data() + t * n_row * n_col; }
  std::int64_t popcount() const;
  bool has_acs() const { return acs_first >= 0 && acs_count > 0; }
};

struct EncodingOperator {
  CoilSensitivities sens;
  SamplingMask mask;
};

// Image sequences are plain ComplexTensor4 with n_coil = 1.
ComplexTensor4 coil_expand(const ComplexTensor4 &x, const CoilSensitivities &s);
ComplexTensor4 coil_combine(const ComplexTensor4 &y, const CoilSensitivities &s);
ComplexTensor4 apply_mask(const ComplexTensor4 &y, const SamplingMask &m);

ComplexTensor4 forward(const EncodingOperator &op, const ComplexTensor4 &x);  // M F S x
ComplexTensor4 adjoint(const EncodingOperator &op, const ComplexTensor4 &y);  // S^H F^H M y

void save_mask(const SamplingMask &m, const std::string &path);
SamplingMask load_mask(const std::string &path);

void save_coilmaps(const CoilSensitivities &s, const std::string &path);
CoilSensitivities load_coilmaps(const std::string &path);

} // namespace dynrec
