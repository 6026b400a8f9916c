#include "priors.hpp"

#include "diffusion.hpp"
#include "parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace dynrec {

OraclePredictor::OraclePredictor(ComplexTensor4 y0, const NoiseSchedule &sched)
    : y0_(std::move(y0)), alpha_bar_(sched.alpha_bar) {}

ComplexTensor4 OraclePredictor::predict(const ComplexTensor4 &y_t, std::int64_t t) const {
  require_same_dims(y_t, y0_, "OraclePredictor");
  if (t < 1 || t >= static_cast<std::int64_t>(alpha_bar_.size())) {
    throw std::out_of_range("OraclePredictor: t out of range");
  }
  const double ab = alpha_bar_[static_cast<std::size_t>(t)];
  const double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
  ComplexTensor4 eps(y_t.dims());
  auto se = eps.samples();
  auto st = y_t.samples();
  auto s0 = y0_.samples();
  for (std::size_t i = 0; i < se.size(); ++i) se[i] = (st[i] - sa * s0[i]) / sn;
  return eps;
}

ComplexTensor4 xf_soft_threshold(const ComplexTensor4 &x, double tau) {
  if (tau < 0.0) throw std::invalid_argument("xf_soft_threshold: tau must be >= 0");
  const auto d = x.dims();
  if (d.time < 2) throw std::invalid_argument("xf_soft_threshold: need n_time >= 2");
  const std::int64_t nt = d.time;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(nt));

  // Precomputed temporal DFT twiddles, w(k,t) = exp(-2*pi*i*k*t/nt)/sqrt(nt).
  std::vector<Cplx> w(static_cast<std::size_t>(nt * nt));
  for (std::int64_t k = 0; k < nt; ++k) {
    for (std::int64_t t = 0; t < nt; ++t) {
      const double ph = -2.0 * M_PI * static_cast<double>((k * t) % nt) / static_cast<double>(nt);
      w[static_cast<std::size_t>(k * nt + t)] = Cplx(std::cos(ph), std::sin(ph)) * inv_sqrt;
    }
  }

  ComplexTensor4 out(d);
  const std::int64_t n_px = d.row * d.col;
  parallel_for(d.coil * n_px, [&](std::int64_t i) {
    const std::int64_t c = i / n_px, p = i % n_px;
    const std::int64_t r = p / d.col, k = p % d.col;
    std::vector<Cplx> v(static_cast<std::size_t>(nt)), spec(static_cast<std::size_t>(nt));
    for (std::int64_t t = 0; t < nt; ++t) v[static_cast<std::size_t>(t)] = x(c, t, r, k);
    for (std::int64_t f = 0; f < nt; ++f) {
      Cplx acc{};
      for (std::int64_t t = 0; t < nt; ++t) acc += w[static_cast<std::size_t>(f * nt + t)] * v[static_cast<std::size_t>(t)];
      spec[static_cast<std::size_t>(f)] = acc;
    }
    for (std::int64_t f = 1; f < nt; ++f) { // DC bin exempt
      const double mag = std::abs(spec[static_cast<std::size_t>(f)]);
      spec[static_cast<std::size_t>(f)] *= mag > tau ? (1.0 - tau / mag) : 0.0;
    }
    for (std::int64_t t = 0; t < nt; ++t) {
      Cplx acc{};
      for (std::int64_t f = 0; f < nt; ++f) {
        acc += std::conj(w[static_cast<std::size_t>(f * nt + t)]) * spec[static_cast<std::size_t>(f)];
      }
      out(c, t, r, k) = acc;
    }
  });
  return out;
}

namespace {

struct TapIndex {
  std::int64_t ci, dt, dy, dx;
};

// Neighbourhood offsets for one output coil, centre-self excluded.
std::vector<TapIndex> tap_layout(std::int64_t co, std::int64_t nc, const KernelDims &kd,
                                 bool exclude_centre) {
  std::vector<TapIndex> v;
  for (std::int64_t ci = 0; ci < nc; ++ci) {
    for (std::int64_t dt = 0; dt < kd.kt; ++dt) {
      for (std::int64_t dy = 0; dy < kd.ky; ++dy) {
        for (std::int64_t dx = 0; dx < kd.kx; ++dx) {
          if (exclude_centre && ci == co && dt == kd.kt / 2 && dy == kd.ky / 2 && dx == kd.kx / 2) {
            continue;
          }
          v.push_back({ci, dt, dy, dx});
        }
      }
    }
  }
  return v;
}

} // namespace

KtKernel fit_kt_kernel(const ComplexTensor4 &y_acs, KernelDims kd, double ridge) {
  const auto d = y_acs.dims();
  if (kd.kt % 2 == 0 || kd.ky % 2 == 0 || kd.kx % 2 == 0) {
    throw std::invalid_argument("fit_kt_kernel: kernel dims must be odd");
  }
  if (d.time < kd.kt || d.row < kd.ky || d.col < kd.kx) {
    throw std::invalid_argument("fit_kt_kernel: ACS block smaller than the kernel");
  }
  if (ridge <= 0.0) throw std::invalid_argument("fit_kt_kernel: ridge must be > 0");

  const std::int64_t ht = kd.kt / 2, hy = kd.ky / 2, hx = kd.kx / 2;
  KtKernel kernel;
  kernel.n_coil = d.coil;
  kernel.kt = kd.kt;
  kernel.ky = kd.ky;
  kernel.kx = kd.kx;
  kernel.center_excluded = true;
  kernel.taps.assign(static_cast<std::size_t>(d.coil * d.coil * kd.kt * kd.ky * kd.kx), Cplx{});

  for (std::int64_t co = 0; co < d.coil; ++co) {
    const auto layout = tap_layout(co, d.coil, kd, true);
    const Eigen::Index nw = static_cast<Eigen::Index>(layout.size());
    Eigen::MatrixXcd ata = Eigen::MatrixXcd::Zero(nw, nw);
    Eigen::VectorXcd atb = Eigen::VectorXcd::Zero(nw);
    Eigen::VectorXcd row(nw);
    for (std::int64_t t = ht; t < d.time - ht; ++t) {
      for (std::int64_t r = hy; r < d.row - hy; ++r) {
        for (std::int64_t k = hx; k < d.col - hx; ++k) {
          for (Eigen::Index j = 0; j < nw; ++j) {
            const auto &ti = layout[static_cast<std::size_t>(j)];
            row(j) = y_acs(ti.ci, t + ti.dt - ht, r + ti.dy - hy, k + ti.dx - hx);
          }
          ata.selfadjointView<Eigen::Lower>().rankUpdate(row, 1.0);
          atb += row.conjugate() * y_acs(co, t, r, k);
        }
      }
    }
    Eigen::MatrixXcd full = ata.selfadjointView<Eigen::Lower>();
    full.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(full);
    if (ldlt.info() != Eigen::Success) {
      throw std::runtime_error("fit_kt_kernel: normal matrix factorisation failed for coil " +
                               std::to_string(co));
    }
    const Eigen::VectorXcd w = ldlt.solve(atb.conjugate()).conjugate();
    for (Eigen::Index j = 0; j < nw; ++j) {
      const auto &ti = layout[static_cast<std::size_t>(j)];
      kernel.tap(co, ti.ci, ti.dt, ti.dy, ti.dx) = w(j);
    }
  }
  return kernel;
}

ComplexTensor4 apply_kt_kernel(const ComplexTensor4 &y, const KtKernel &kernel,
                               const SamplingMask *blend_mask) {
  const auto d = y.dims();
  if (d.coil != kernel.n_coil) throw std::invalid_argument("apply_kt_kernel: coil count mismatch");
  if (blend_mask &&
      (blend_mask->n_time != d.time || blend_mask->n_row != d.row || blend_mask->n_col != d.col)) {
    throw std::invalid_argument("apply_kt_kernel: blend mask dims mismatch");
  }
  const std::int64_t ht = kernel.kt / 2, hy = kernel.ky / 2, hx = kernel.kx / 2;
  ComplexTensor4 out(d);
  parallel_for(d.coil * d.time, [&](std::int64_t i) {
    const std::int64_t co = i / d.time, t = i % d.time;
    for (std::int64_t r = 0; r < d.row; ++r) {
      for (std::int64_t k = 0; k < d.col; ++k) {
        Cplx acc{};
        for (std::int64_t ci = 0; ci < d.coil; ++ci) {
          for (std::int64_t dt = -ht; dt <= ht; ++dt) {
            const std::int64_t tt = t + dt;
            if (tt < 0 || tt >= d.time) continue;
            for (std::int64_t dy = -hy; dy <= hy; ++dy) {
              const std::int64_t rr = r + dy;
              if (rr < 0 || rr >= d.row) continue;
              for (std::int64_t dx = -hx; dx <= hx; ++dx) {
                const std::int64_t kk = k + dx;
                if (kk < 0 || kk >= d.col) continue;
                acc += kernel.tap(co, ci, dt + ht, dy + hy, dx + hx) * y(ci, tt, rr, kk);
              }
            }
          }
        }
        out(co, t, r, k) = acc;
      }
    }
  });
  if (blend_mask) {
    parallel_for(d.coil * d.time, [&](std::int64_t i) {
      const std::int64_t c = i / d.time, t = i % d.time;
      const Cplx *yf = y.frame(c, t);
      Cplx *of = out.frame(c, t);
      const std::uint8_t *mf = blend_mask->frame(t);
      for (std::int64_t p = 0; p < d.row * d.col; ++p) {
        if (mf[p]) of[p] = yf[p];
      }
    });
  }
  return out;
}

void save_kt_kernel(const KtKernel &k, const std::string &path) {
  ComplexTensor4 t({k.n_coil, k.n_coil, k.kt, k.ky * k.kx});
  std::copy(k.taps.begin(), k.taps.end(), t.samples().begin());
  save_cplx(t, path, {{"kind", "kt-kernel"}});
  nlohmann::json j{{"n_coil", k.n_coil},
                   {"kt", k.kt},
                   {"ky", k.ky},
                   {"kx", k.kx},
                   {"center_excluded", k.center_excluded}};
  std::ofstream os(path + ".kernel.json");
  if (!os) throw TensorIoError("cannot open for write: " + path + ".kernel.json");
  os << j.dump(2) << "\n";
}

KtKernel load_kt_kernel(const std::string &path) {
  std::ifstream is(path + ".kernel.json");
  if (!is) throw FileMissingError("missing kernel sidecar: " + path + ".kernel.json");
  nlohmann::json j;
  is >> j;
  KtKernel k;
  k.n_coil = j.at("n_coil").get<std::int64_t>();
  k.kt = j.at("kt").get<std::int64_t>();
  k.ky = j.at("ky").get<std::int64_t>();
  k.kx = j.at("kx").get<std::int64_t>();
  k.center_excluded = j.at("center_excluded").get<bool>();
  ComplexTensor4 t = load_cplx(path);
  if (t.size() != k.n_coil * k.n_coil * k.kt * k.ky * k.kx) {
    throw PayloadSizeError("kernel payload does not match sidecar dims: " + path);
  }
  k.taps.assign(t.samples().begin(), t.samples().end());
  return k;
}

} // namespace dynrec
