#include "phantom.hpp"

#include "rng.hpp"

#include <cmath>

namespace dynrec {

namespace {

// Raised-cosine step: 1 inside, 0 outside, smooth over `soft` pixels around
// the boundary defined by signed distance d (negative inside).
double soft_edge(double d, double soft) {
  if (soft <= 0.0) return d <= 0.0 ? 1.0 : 0.0;
  if (d <= -soft) return 1.0;
  if (d >= soft) return 0.0;
  return 0.5 * (1.0 - std::sin(0.5 * M_PI * d / soft));
}

// Signed distance proxy for an axis-aligned ellipse: (quadratic form - 1)
// rescaled by the local radius so the soft edge has roughly constant width.
double ellipse_d(double r, double c, double cr, double cc, double ar, double ac) {
  const double q = std::sqrt((r - cr) * (r - cr) / (ar * ar) + (c - cc) * (c - cc) / (ac * ac));
  return (q - 1.0) * std::min(ar, ac);
}

struct CardiacGeom {
  double body_ar, body_ac;
  double ring_cr_off, ring_cc_off;
  double ring_outer;
  double ring_inner_base;
  double blob_cr_off, blob_cc_off, blob_r;
};

CardiacGeom cardiac_geom(const PhantomSpec &spec) {
  Rng rng(spec.seed * 0x9e3779b97f4a7c15ULL + 17);
  const double n = static_cast<double>(std::min(spec.n_row, spec.n_col));
  CardiacGeom g;
  g.body_ar = n * (0.40 + 0.02 * rng.uniform());
  g.body_ac = n * (0.34 + 0.02 * rng.uniform());
  g.ring_cr_off = n * (0.04 + 0.02 * rng.uniform());
  g.ring_cc_off = -n * (0.05 + 0.02 * rng.uniform());
  g.ring_outer = n * 0.18;
  g.ring_inner_base = n * 0.11;
  g.blob_cr_off = -n * 0.12;
  g.blob_cc_off = n * 0.10;
  g.blob_r = n * 0.06;
  return g;
}

ComplexTensor4 cardiac_frame(const PhantomSpec &spec, double phase) {
  const auto g = cardiac_geom(spec);
  const double cr = (spec.n_row - 1) / 2.0, cc = (spec.n_col - 1) / 2.0;
  // Ring inner radius pulsates over one cycle; amplitude is a radius fraction.
  const double inner =
      g.ring_inner_base * (1.0 + spec.amplitude * std::sin(2.0 * M_PI * phase));
  ComplexTensor4 out({1, 1, spec.n_row, spec.n_col});
  for (std::int64_t r = 0; r < spec.n_row; ++r) {
    for (std::int64_t k = 0; k < spec.n_col; ++k) {
      const double rr = static_cast<double>(r), kk = static_cast<double>(k);
      double v = spec.background;
      v += 0.35 * soft_edge(ellipse_d(rr, kk, cr, cc, g.body_ar, g.body_ac), spec.edge_softness);
      const double dro = ellipse_d(rr, kk, cr + g.ring_cr_off, cc + g.ring_cc_off, g.ring_outer, g.ring_outer);
      const double dri = ellipse_d(rr, kk, cr + g.ring_cr_off, cc + g.ring_cc_off, inner, inner);
      v += 0.55 * soft_edge(dro, spec.edge_softness) * (1.0 - soft_edge(dri, spec.edge_softness));
      v += 0.25 * soft_edge(ellipse_d(rr, kk, cr + g.blob_cr_off, cc + g.blob_cc_off, g.blob_r, g.blob_r),
                            spec.edge_softness);
      out(0, 0, r, k) = Cplx(std::min(v, 1.0), 0.0);
    }
  }
  return out;
}

ComplexTensor4 respiratory_frame(const PhantomSpec &spec, double phase) {
  Rng rng(spec.seed * 0x9e3779b97f4a7c15ULL + 41);
  const double n = static_cast<double>(std::min(spec.n_row, spec.n_col));
  const double lobe_ar = n * (0.28 + 0.02 * rng.uniform());
  const double lobe_ac = n * (0.16 + 0.01 * rng.uniform());
  const double vessel_r = n * 0.045;
  const double cr = (spec.n_row - 1) / 2.0, cc = (spec.n_col - 1) / 2.0;
  // Pure translation along rows; amplitude is in pixels.
  const double shift = spec.amplitude * std::sin(2.0 * M_PI * phase);
  ComplexTensor4 out({1, 1, spec.n_row, spec.n_col});
  for (std::int64_t r = 0; r < spec.n_row; ++r) {
    for (std::int64_t k = 0; k < spec.n_col; ++k) {
      const double rr = static_cast<double>(r) - shift, kk = static_cast<double>(k);
      double v = spec.background;
      for (int side : {-1, +1}) {
        const double lc = cc + side * n * 0.19;
        v += 0.6 * soft_edge(ellipse_d(rr, kk, cr, lc, lobe_ar, lobe_ac), spec.edge_softness);
        v += 0.3 * soft_edge(ellipse_d(rr, kk, cr + n * 0.08, lc, vessel_r, vessel_r), spec.edge_softness);
      }
      out(0, 0, r, k) = Cplx(std::min(v, 1.0), 0.0);
    }
  }
  return out;
}

} // namespace

ComplexTensor4 phantom_frame(const PhantomSpec &spec, double phase) {
  phase -= std::floor(phase);
  return spec.mode == PhantomMode::Cardiac ? cardiac_frame(spec, phase)
                                           : respiratory_frame(spec, phase);
}

ComplexTensor4 dynamic_phantom(const PhantomSpec &spec) {
  ComplexTensor4 out({1, spec.n_time, spec.n_row, spec.n_col});
  for (std::int64_t t = 0; t < spec.n_time; ++t) {
    ComplexTensor4 f = phantom_frame(spec, static_cast<double>(t) / spec.period);
    std::copy(f.samples().begin(), f.samples().end(),
              out.samples().begin() + t * spec.n_row * spec.n_col);
  }
  return out;
}

CoilSensitivities synth_coilmaps(std::int64_t n_row, std::int64_t n_col, std::int64_t n_coil,
                                 std::uint64_t seed) {
  if (n_coil < 1) throw std::invalid_argument("synth_coilmaps: n_coil must be >= 1");
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 7);
  CoilSensitivities s;
  s.n_coil = n_coil;
  s.n_row = n_row;
  s.n_col = n_col;
  s.maps.resize(static_cast<std::size_t>(n_coil * n_row * n_col));

  const double cr = (n_row - 1) / 2.0, cc = (n_col - 1) / 2.0;
  const double width = 0.6 * std::max(n_row, n_col);
  for (std::int64_t c = 0; c < n_coil; ++c) {
    // Gaussian lobe centred just outside the FOV border, equally spaced in
    // angle, with a mild seeded linear phase ramp.
    const double ang = 2.0 * M_PI * (static_cast<double>(c) + 0.3 * rng.uniform()) / n_coil;
    const double lr = cr + 0.65 * n_row * std::sin(ang);
    const double lc = cc + 0.65 * n_col * std::cos(ang);
    const double phr = (rng.uniform() - 0.5) * 2.0 * M_PI / n_row;
    const double phc = (rng.uniform() - 0.5) * 2.0 * M_PI / n_col;
    const double ph0 = rng.uniform() * 2.0 * M_PI;
    for (std::int64_t r = 0; r < n_row; ++r) {
      for (std::int64_t k = 0; k < n_col; ++k) {
        const double d2 = (r - lr) * (r - lr) + (k - lc) * (k - lc);
        const double mag = std::exp(-0.5 * d2 / (width * width));
        const double ph = ph0 + phr * (r - cr) + phc * (k - cc);
        s.at(c, r, k) = std::polar(mag, n_coil == 1 ? 0.0 : ph);
      }
    }
  }
  // Normalise to sum-of-squares one at every pixel.
  for (std::int64_t r = 0; r < n_row; ++r) {
    for (std::int64_t k = 0; k < n_col; ++k) {
      double ss = 0.0;
      for (std::int64_t c = 0; c < n_coil; ++c) ss += std::norm(s.at(c, r, k));
      const double inv = 1.0 / std::sqrt(ss);
      for (std::int64_t c = 0; c < n_coil; ++c) s.at(c, r, k) *= inv;
    }
  }
  return s;
}

std::vector<double> motion_waveform(std::int64_t n, double period, WaveKind kind,
                                    std::uint64_t seed, double period_jitter) {
  if (period <= 1.0) throw std::invalid_argument("motion_waveform: period must be > 1");
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 101);
  std::vector<double> w(static_cast<std::size_t>(n));
  double phase = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (kind == WaveKind::Sine) {
      w[i] = std::sin(2.0 * M_PI * phase);
    } else {
      const double f = phase - std::floor(phase);
      w[i] = 2.0 * f - 1.0;
    }
    const double jit = period_jitter > 0.0 ? 1.0 + period_jitter * (2.0 * rng.uniform() - 1.0) : 1.0;
    phase += 1.0 / (period * jit);
  }
  return w;
}

} // namespace dynrec
