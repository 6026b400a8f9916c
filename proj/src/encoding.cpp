#include "encoding.hpp"

#include "fft.hpp"
#include "parallel.hpp"

#include <stdexcept>

namespace dynrec {

std::int64_t SamplingMask::popcount() const {
  std::int64_t n = 0;
  for (auto v : m) n += v ? 1 : 0;
  return n;
}

namespace {

void check_spatial(const ComplexTensor4 &t, const CoilSensitivities &s, const char *where) {
  if (t.dims().row != s.n_row || t.dims().col != s.n_col) {
    throw std::invalid_argument(std::string(where) + ": spatial dims mismatch");
  }
}

void check_mask(const ComplexTensor4 &y, const SamplingMask &m, const char *where) {
  if (y.dims().time != m.n_time || y.dims().row != m.n_row || y.dims().col != m.n_col) {
    throw std::invalid_argument(std::string(where) + ": mask dims mismatch");
  }
}

} // namespace

ComplexTensor4 coil_expand(const ComplexTensor4 &x, const CoilSensitivities &s) {
  check_spatial(x, s, "coil_expand");
  if (x.dims().coil != 1) throw std::invalid_argument("coil_expand: input must have n_coil = 1");
  const auto d = x.dims();
  ComplexTensor4 out({s.n_coil, d.time, d.row, d.col});
  parallel_for(s.n_coil * d.time, [&](std::int64_t i) {
    const std::int64_t c = i / d.time, t = i % d.time;
    const Cplx *xf = x.frame(0, t);
    Cplx *of = out.frame(c, t);
    const Cplx *sc = &s.at(c, 0, 0);
    for (std::int64_t p = 0; p < d.row * d.col; ++p) of[p] = sc[p] * xf[p];
  });
  return out;
}

ComplexTensor4 coil_combine(const ComplexTensor4 &y, const CoilSensitivities &s) {
  check_spatial(y, s, "coil_combine");
  if (y.dims().coil != s.n_coil) throw std::invalid_argument("coil_combine: coil count mismatch");
  const auto d = y.dims();
  ComplexTensor4 out({1, d.time, d.row, d.col});
  parallel_for(d.time, [&](std::int64_t t) {
    Cplx *of = out.frame(0, t);
    for (std::int64_t c = 0; c < d.coil; ++c) {
      const Cplx *yf = y.frame(c, t);
      const Cplx *sc = &s.at(c, 0, 0);
      for (std::int64_t p = 0; p < d.row * d.col; ++p) of[p] += std::conj(sc[p]) * yf[p];
    }
  });
  return out;
}

ComplexTensor4 apply_mask(const ComplexTensor4 &y, const SamplingMask &m) {
  check_mask(y, m, "apply_mask");
  const auto d = y.dims();
  ComplexTensor4 out(d);
  parallel_for(d.coil * d.time, [&](std::int64_t i) {
    const std::int64_t c = i / d.time, t = i % d.time;
    const Cplx *yf = y.frame(c, t);
    Cplx *of = out.frame(c, t);
    const std::uint8_t *mf = m.frame(t);
    for (std::int64_t p = 0; p < d.row * d.col; ++p) of[p] = mf[p] ? yf[p] : Cplx{};
  });
  return out;
}

ComplexTensor4 forward(const EncodingOperator &op, const ComplexTensor4 &x) {
  return apply_mask(fft2c(coil_expand(x, op.sens)), op.mask);
}

ComplexTensor4 adjoint(const EncodingOperator &op, const ComplexTensor4 &y) {
  return coil_combine(ifft2c(apply_mask(y, op.mask)), op.sens);
}

void save_mask(const SamplingMask &m, const std::string &path) {
  ComplexTensor4 t({1, m.n_time, m.n_row, m.n_col});
  auto s = t.samples();
  for (std::size_t i = 0; i < m.m.size(); ++i) s[i] = Cplx(m.m[i] ? 1.0 : 0.0, 0.0);
  std::map<std::string, std::string> meta;
  meta["kind"] = "sampling-mask";
  if (m.has_acs()) {
    meta["acs_first"] = std::to_string(m.acs_first);
    meta["acs_count"] = std::to_string(m.acs_count);
  }
  save_cplx(t, path, meta);
}

SamplingMask load_mask(const std::string &path) {
  TensorHeader h;
  ComplexTensor4 t = load_cplx(path, &h);
  if (t.dims().coil != 1) throw HeaderParseError("mask file must have n_coil = 1: " + path);
  SamplingMask m;
  m.n_time = t.dims().time;
  m.n_row = t.dims().row;
  m.n_col = t.dims().col;
  m.m.resize(static_cast<std::size_t>(t.size()));
  auto s = t.samples();
  for (std::size_t i = 0; i < m.m.size(); ++i) m.m[i] = s[i].real() != 0.0 ? 1 : 0;
  if (auto it = h.meta.find("acs_first"); it != h.meta.end()) m.acs_first = std::stoll(it->second);
  if (auto it = h.meta.find("acs_count"); it != h.meta.end()) m.acs_count = std::stoll(it->second);
  return m;
}

void save_coilmaps(const CoilSensitivities &s, const std::string &path) {
  ComplexTensor4 t({s.n_coil, 1, s.n_row, s.n_col});
  std::copy(s.maps.begin(), s.maps.end(), t.samples().begin());
  save_cplx(t, path, {{"kind", "coil-sensitivities"}});
}

CoilSensitivities load_coilmaps(const std::string &path) {
  ComplexTensor4 t = load_cplx(path);
  if (t.dims().time != 1) throw HeaderParseError("coil map file must have n_time = 1: " + path);
  CoilSensitivities s;
  s.n_coil = t.dims().coil;
  s.n_row = t.dims().row;
  s.n_col = t.dims().col;
  s.maps.assign(t.samples().begin(), t.samples().end());
  return s;
}

} // namespace dynrec
