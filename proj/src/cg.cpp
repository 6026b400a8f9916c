#include "cg.hpp"

#include "fft.hpp"
#include "parallel.hpp"

#include <cmath>
#include <fstream>

namespace dynrec {

namespace {

double resolve_mu(const CGConfig &cfg, const ComplexTensor4 &u) {
  if (cfg.smooth_mu > 0.0) return cfg.smooth_mu;
  double peak = 0.0;
  for (const auto &v : u.samples()) peak = std::max(peak, std::abs(v));
  return std::max(1e-6 * peak, 1e-300);
}

// Circular or clamped temporal difference d[t] = u[t+1] - u[t]; in the
// non-circular case the last difference is zero.
ComplexTensor4 time_diff(const ComplexTensor4 &u, bool circular) {
  const auto d = u.dims();
  ComplexTensor4 out(d);
  parallel_for(d.coil * d.time, [&](std::int64_t i) {
    const std::int64_t c = i / d.time, t = i % d.time;
    const std::int64_t tn = t + 1 < d.time ? t + 1 : (circular ? 0 : -1);
    Cplx *of = out.frame(c, t);
    if (tn < 0) return; // frame already zero
    const Cplx *cur = u.frame(c, t);
    const Cplx *nxt = u.frame(c, tn);
    for (std::int64_t p = 0; p < d.row * d.col; ++p) of[p] = nxt[p] - cur[p];
  });
  return out;
}

// Adjoint of time_diff: (D^H w)[t] = w[t-1] - w[t] with the matching wrap.
ComplexTensor4 time_diff_adjoint(const ComplexTensor4 &w, bool circular) {
  const auto d = w.dims();
  ComplexTensor4 out(d);
  parallel_for(d.coil * d.time, [&](std::int64_t i) {
    const std::int64_t c = i / d.time, t = i % d.time;
    const std::int64_t tp = t > 0 ? t - 1 : (circular ? d.time - 1 : -1);
    Cplx *of = out.frame(c, t);
    const Cplx *wt = w.frame(c, t);
    const Cplx *wp = tp >= 0 ? w.frame(c, tp) : nullptr;
    const bool cur_valid = circular || t + 1 < d.time; // w[t] is zero otherwise anyway
    for (std::int64_t p = 0; p < d.row * d.col; ++p) {
      Cplx v{};
      if (wp) v += wp[p];
      if (cur_valid) v -= wt[p];
      of[p] = v;
    }
  });
  return out;
}

struct ObjectiveParts {
  double fidelity = 0.0;
  double tv = 0.0; // already offset so a constant sequence scores 0
  double total() const { return fidelity + tv; }
};

ObjectiveParts objective_parts(const ComplexTensor4 &y, const ComplexTensor4 &y_meas,
                               const SamplingMask &m, const CoilSensitivities &sens,
                               const CGConfig &cfg, double mu) {
  require_same_dims(y, y_meas, "objective");
  ObjectiveParts parts;
  const auto d = y.dims();
  for (std::int64_t c = 0; c < d.coil; ++c) {
    for (std::int64_t t = 0; t < d.time; ++t) {
      const Cplx *yf = y.frame(c, t);
      const Cplx *mf = y_meas.frame(c, t);
      const std::uint8_t *mm = m.frame(t);
      for (std::int64_t p = 0; p < d.row * d.col; ++p) {
        if (mm[p]) parts.fidelity += std::norm(yf[p] - mf[p]);
      }
    }
  }
  if (cfg.lambda_td > 0.0) {
    const ComplexTensor4 u = coil_combine(ifft2c(y), sens);
    const ComplexTensor4 dt = time_diff(u, cfg.circular_time);
    double acc = 0.0;
    for (const auto &v : dt.samples()) acc += std::sqrt(std::norm(v) + mu * mu) - mu;
    parts.tv = cfg.lambda_td * acc;
  }
  return parts;
}

} // namespace

double objective(const ComplexTensor4 &y, const ComplexTensor4 &y_meas, const SamplingMask &m,
                 const CoilSensitivities &sens, const CGConfig &cfg) {
  const double mu =
      cfg.smooth_mu > 0.0 ? cfg.smooth_mu : resolve_mu(cfg, coil_combine(ifft2c(y), sens));
  return objective_parts(y, y_meas, m, sens, cfg, mu).total();
}

ComplexTensor4 gradient(const ComplexTensor4 &y, const ComplexTensor4 &y_meas,
                        const SamplingMask &m, const CoilSensitivities &sens,
                        const CGConfig &cfg) {
  require_same_dims(y, y_meas, "gradient");
  const auto d = y.dims();
  ComplexTensor4 g(d);
  parallel_for(d.coil * d.time, [&](std::int64_t i) {
    const std::int64_t c = i / d.time, t = i % d.time;
    const Cplx *yf = y.frame(c, t);
    const Cplx *mf = y_meas.frame(c, t);
    Cplx *gf = g.frame(c, t);
    const std::uint8_t *mm = m.frame(t);
    for (std::int64_t p = 0; p < d.row * d.col; ++p) {
      gf[p] = mm[p] ? 2.0 * (yf[p] - mf[p]) : Cplx{};
    }
  });
  if (cfg.lambda_td > 0.0) {
    const ComplexTensor4 u = coil_combine(ifft2c(y), sens);
    const double mu = resolve_mu(cfg, u);
    ComplexTensor4 dt = time_diff(u, cfg.circular_time);
    for (auto &v : dt.samples()) v /= std::sqrt(std::norm(v) + mu * mu);
    const ComplexTensor4 back = fft2c(coil_expand(time_diff_adjoint(dt, cfg.circular_time), sens));
    auto sg = g.samples();
    auto sb = back.samples();
    for (std::size_t idx = 0; idx < sg.size(); ++idx) sg[idx] += cfg.lambda_td * sb[idx];
  }
  return g;
}

CGResult cg_refine(const ComplexTensor4 &y_init, const ComplexTensor4 &y_meas,
                   const SamplingMask &m, const CoilSensitivities &sens, const CGConfig &cfg) {
  CGResult res;
  res.y = y_init;
  const double mu = resolve_mu(cfg, coil_combine(ifft2c(y_init), sens));
  CGConfig run = cfg;
  run.smooth_mu = mu;

  auto f = [&](const ComplexTensor4 &y) { return objective_parts(y, y_meas, m, sens, run, mu).total(); };

  ComplexTensor4 g = gradient(res.y, y_meas, m, sens, run);
  double fval = f(res.y);
  double gg = 0.0;
  for (const auto &v : g.samples()) gg += std::norm(v);
  ComplexTensor4 dir(g.dims());
  {
    auto sd = dir.samples();
    auto sg = g.samples();
    for (std::size_t i = 0; i < sd.size(); ++i) sd[i] = -sg[i];
  }
  const std::int64_t restart_every = std::max<std::int64_t>(1, y_init.dims().time * y_init.dims().row);

  for (std::int64_t it = 0; it < cfg.max_iters; ++it) {
    const double gnorm = std::sqrt(gg);
    if (cfg.grad_tol > 0.0 && gnorm < cfg.grad_tol) break;
    if (gg == 0.0) break;

    // Directional derivative at 0 under the Wirtinger scaling.
    double dphi0 = 0.0;
    {
      auto sg = g.samples();
      auto sd = dir.samples();
      for (std::size_t i = 0; i < sg.size(); ++i) {
        dphi0 += sg[i].real() * sd[i].real() + sg[i].imag() * sd[i].imag();
      }
    }
    if (dphi0 >= 0.0) { // not a descent direction: reset to steepest descent
      auto sd = dir.samples();
      auto sg = g.samples();
      for (std::size_t i = 0; i < sd.size(); ++i) sd[i] = -sg[i];
      dphi0 = -gg;
      if (dphi0 >= 0.0) break;
    }

    auto advance = [&](double alpha) {
      ComplexTensor4 yn(res.y.dims());
      auto sy = res.y.samples();
      auto sd = dir.samples();
      auto sn = yn.samples();
      for (std::size_t i = 0; i < sn.size(); ++i) sn[i] = sy[i] + alpha * sd[i];
      return yn;
    };

    // Quadratic fit through (phi(0), phi'(0), phi(c)) gives the exact
    // minimiser when the objective is quadratic along the direction.
    const double c = cfg.initial_step;
    const double phic = f(advance(c));
    const double curv = (phic - fval - dphi0 * c) / (c * c);
    double alpha = curv > 0.0 ? -dphi0 / (2.0 * curv) : c;
    if (!(alpha > 0.0) || !std::isfinite(alpha)) alpha = c;

    ComplexTensor4 y_next = advance(alpha);
    double f_next = f(y_next);
    std::int64_t bt = 0;
    while (f_next > fval + cfg.sufficient_decrease * alpha * dphi0 && bt < cfg.max_backtracks) {
      alpha *= cfg.shrink;
      y_next = advance(alpha);
      f_next = f(y_next);
      ++bt;
    }
    if (f_next > fval + cfg.sufficient_decrease * alpha * dphi0) {
      res.stalled = true;
      break;
    }

    res.y = std::move(y_next);
    fval = f_next;
    ComplexTensor4 g_next = gradient(res.y, y_meas, m, sens, run);
    double gg_next = 0.0;
    for (const auto &v : g_next.samples()) gg_next += std::norm(v);

    const bool restart = (it + 1) % restart_every == 0;
    const double beta = restart || gg == 0.0 ? 0.0 : gg_next / gg; // Fletcher-Reeves
    {
      auto sd = dir.samples();
      auto sg = g_next.samples();
      for (std::size_t i = 0; i < sd.size(); ++i) sd[i] = -sg[i] + beta * sd[i];
    }
    g = std::move(g_next);
    gg = gg_next;
    res.history.push_back({it, fval, std::sqrt(gg), alpha});
  }
  return res;
}

ComplexTensor4 cs_reconstruct(const ComplexTensor4 &y_meas, const SamplingMask &m,
                              const CoilSensitivities &sens, const CGConfig &cfg) {
  const ComplexTensor4 y_init = apply_mask(y_meas, m);
  CGResult res = cg_refine(y_init, y_meas, m, sens, cfg);
  return coil_combine(ifft2c(res.y), sens);
}

void write_cg_history_csv(const std::vector<CGIterRecord> &history, const std::string &path) {
  std::ofstream os(path);
  if (!os) throw TensorIoError("cannot open for write: " + path);
  os << "iter,objective,grad_norm,step\n";
  char line[128];
  for (const auto &rec : history) {
    std::snprintf(line, sizeof line, "%ld,%.17g,%.17g,%.17g\n", rec.iter, rec.objective,
                  rec.grad_norm, rec.step);
    os << line;
  }
}

} // namespace dynrec
