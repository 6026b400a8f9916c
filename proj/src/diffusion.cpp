#include "diffusion.hpp"

#include "fft.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <cmath>
#include <fstream>

namespace dynrec {

void NoiseSchedule::validate() const {
  if (T < 1 || static_cast<std::int64_t>(beta.size()) != T + 1 ||
      static_cast<std::int64_t>(alpha_bar.size()) != T + 1) {
    throw std::invalid_argument("NoiseSchedule: table sizes do not match T");
  }
  if (alpha_bar[0] != 1.0) throw std::invalid_argument("NoiseSchedule: alpha_bar[0] must be 1");
  for (std::int64_t t = 1; t <= T; ++t) {
    if (beta[t] < 0.0 || beta[t] >= 1.0) throw std::invalid_argument("NoiseSchedule: beta out of [0,1)");
    if (alpha_bar[t] >= alpha_bar[t - 1]) {
      throw std::invalid_argument("NoiseSchedule: alpha_bar must be strictly decreasing");
    }
  }
}

NoiseSchedule cosine_schedule(std::int64_t T) {
  if (T < 2) throw std::invalid_argument("cosine_schedule: T must be >= 2");
  const double s = 0.008;
  auto f = [&](double t) {
    const double u = ((t / static_cast<double>(T) + s) / (1.0 + s)) * M_PI / 2.0;
    const double c = std::cos(u);
    return c * c;
  };
  NoiseSchedule sched;
  sched.T = T;
  sched.beta.assign(static_cast<std::size_t>(T + 1), 0.0);
  sched.alpha.assign(static_cast<std::size_t>(T + 1), 1.0);
  sched.alpha_bar.assign(static_cast<std::size_t>(T + 1), 1.0);
  sched.sigma.assign(static_cast<std::size_t>(T + 1), 0.0);
  const double f0 = f(0.0);
  for (std::int64_t t = 1; t <= T; ++t) {
    const double ratio = f(static_cast<double>(t)) / f(static_cast<double>(t - 1));
    const double beta = std::min(1.0 - ratio, 0.999);
    sched.beta[t] = beta;
    sched.alpha[t] = 1.0 - beta;
    sched.alpha_bar[t] = sched.alpha_bar[t - 1] * sched.alpha[t];
    const double prev = sched.alpha_bar[t - 1];
    sched.sigma[t] = std::sqrt((1.0 - prev) / (1.0 - sched.alpha_bar[t]) * beta);
  }
  (void)f0;
  sched.validate();
  return sched;
}

namespace {

void check_t(std::int64_t t, const NoiseSchedule &sched, const char *where) {
  if (t < 1 || t > sched.T) {
    throw std::out_of_range(std::string(where) + ": t = " + std::to_string(t) +
                            " outside [1, " + std::to_string(sched.T) + "]");
  }
}

} // namespace

ComplexTensor4 q_sample(const ComplexTensor4 &y0, std::int64_t t, const ComplexTensor4 &eps,
                        const NoiseSchedule &sched) {
  require_same_dims(y0, eps, "q_sample");
  check_t(t, sched, "q_sample");
  const double sa = std::sqrt(sched.alpha_bar[static_cast<std::size_t>(t)]);
  const double sn = std::sqrt(1.0 - sched.alpha_bar[static_cast<std::size_t>(t)]);
  ComplexTensor4 out(y0.dims());
  auto so = out.samples();
  auto s0 = y0.samples();
  auto se = eps.samples();
  for (std::size_t i = 0; i < so.size(); ++i) so[i] = sa * s0[i] + sn * se[i];
  return out;
}

ComplexTensor4 data_consistency(const ComplexTensor4 &y_t, const ComplexTensor4 &y_meas,
                                const SamplingMask &m, double lambda_t) {
  require_same_dims(y_t, y_meas, "data_consistency");
  if (lambda_t < 0.0 || lambda_t > 1.0) {
    throw std::invalid_argument("data_consistency: lambda must be in [0,1]");
  }
  const auto d = y_t.dims();
  if (m.n_time != d.time || m.n_row != d.row || m.n_col != d.col) {
    throw std::invalid_argument("data_consistency: mask dims mismatch");
  }
  ComplexTensor4 out(d);
  parallel_for(d.coil * d.time, [&](std::int64_t i) {
    const std::int64_t c = i / d.time, t = i % d.time;
    const Cplx *sy = y_t.frame(c, t);
    const Cplx *sm = y_meas.frame(c, t);
    Cplx *so = out.frame(c, t);
    const std::uint8_t *mf = m.frame(t);
    for (std::int64_t p = 0; p < d.row * d.col; ++p) {
      so[p] = mf[p] ? lambda_t * sm[p] + (1.0 - lambda_t) * sy[p] : sy[p];
    }
  });
  return out;
}

ComplexTensor4 predict_clean(const ComplexTensor4 &y_t, const ComplexTensor4 &eps_hat,
                             std::int64_t t, const NoiseSchedule &sched) {
  require_same_dims(y_t, eps_hat, "predict_clean");
  check_t(t, sched, "predict_clean");
  const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
  const double inv_sa = 1.0 / std::sqrt(ab);
  const double sn = std::sqrt(1.0 - ab);
  ComplexTensor4 out(y_t.dims());
  auto so = out.samples();
  auto sy = y_t.samples();
  auto se = eps_hat.samples();
  for (std::size_t i = 0; i < so.size(); ++i) so[i] = (sy[i] - sn * se[i]) * inv_sa;
  return out;
}

ComplexTensor4 reverse_step(const ComplexTensor4 &y_t, const ComplexTensor4 &y0_refined,
                            std::int64_t t, const ComplexTensor4 &z, const NoiseSchedule &sched) {
  require_same_dims(y_t, y0_refined, "reverse_step");
  require_same_dims(y_t, z, "reverse_step");
  check_t(t, sched, "reverse_step");
  const double ab_t = sched.alpha_bar[static_cast<std::size_t>(t)];
  const double ab_p = sched.alpha_bar[static_cast<std::size_t>(t - 1)];
  const double beta = sched.beta[static_cast<std::size_t>(t)];
  const double c_state = std::sqrt(ab_t) * (1.0 - ab_p) / (1.0 - ab_t);
  const double c_clean = std::sqrt(ab_p) * beta / (1.0 - ab_t);
  const double sig = sched.sigma[static_cast<std::size_t>(t)];
  ComplexTensor4 out(y_t.dims());
  auto so = out.samples();
  auto sy = y_t.samples();
  auto sc = y0_refined.samples();
  auto sz = z.samples();
  for (std::size_t i = 0; i < so.size(); ++i) {
    so[i] = c_state * sy[i] + c_clean * sc[i] + sig * sz[i];
  }
  return out;
}

SampleResult sample(const ComplexTensor4 &y_meas, const SamplingMask &m,
                    const CoilSensitivities &sens, const PriorStack &priors,
                    const NoiseSchedule &sched, const DCConfig &dc, const SampleOptions &opts) {
  if (!priors.noise || !priors.xt) {
    throw std::invalid_argument("sample: prior stack needs a noise predictor and an x-t model");
  }
  Rng rng(opts.seed);
  ComplexTensor4 state(y_meas.dims());
  rng.fill_cgauss(state); // y_T ~ N(0, I)

  SampleResult res;
  for (std::int64_t t = sched.T; t >= 1; --t) {
    state = data_consistency(state, y_meas, m, dc.lambda_at(t, sched.T));
    const ComplexTensor4 eps_hat = priors.noise->predict(state, t);
    ComplexTensor4 clean = predict_clean(state, eps_hat, t, sched);
    // x-t prior acts in the image domain of the clean estimate.
    clean = fft2c(priors.xt->apply(ifft2c(clean), t));
    if (priors.kt) {
      clean = apply_kt_kernel(clean, *priors.kt, priors.kt_blend ? &m : nullptr);
    }
    if (opts.cg_enabled) {
      clean = cg_refine(clean, y_meas, m, sens, opts.cg).y;
    }
    ComplexTensor4 z(state.dims());
    if (t > 1) rng.fill_cgauss(z); // z = 0 at the final step
    state = reverse_step(state, clean, t, z, sched);

    if (opts.collect_diagnostics || opts.reference) {
      StepDiag diag;
      diag.step = t;
      diag.objective = objective(clean, y_meas, m, sens, opts.cg);
      if (opts.reference) diag.nmse = nmse(state, *opts.reference);
      res.diags.push_back(diag);
    }
    if (!state.all_finite()) {
      throw std::runtime_error("sample: non-finite state at step t = " + std::to_string(t));
    }
  }
  if (opts.terminal_dc) {
    state = data_consistency(state, y_meas, m, 1.0);
  }
  res.y0 = std::move(state);
  return res;
}

ComplexTensor4 extract_acs(const ComplexTensor4 &y, const SamplingMask &m) {
  if (!m.has_acs()) throw std::invalid_argument("extract_acs: mask has no ACS rows");
  const auto d = y.dims();
  ComplexTensor4 acs({d.coil, d.time, m.acs_count, d.col});
  for (std::int64_t c = 0; c < d.coil; ++c) {
    for (std::int64_t t = 0; t < d.time; ++t) {
      for (std::int64_t r = 0; r < m.acs_count; ++r) {
        for (std::int64_t k = 0; k < d.col; ++k) {
          acs(c, t, r, k) = y(c, t, m.acs_first + r, k);
        }
      }
    }
  }
  return acs;
}

TrainingLosses training_losses(const ComplexTensor4 &y0, const SamplingMask &m, std::int64_t t,
                               const ComplexTensor4 &eps, const PriorStack &priors,
                               const NoiseSchedule &sched, const DCConfig &dc, double lambda_xt,
                               double lambda_kt) {
  if (!priors.noise || !priors.xt) {
    throw std::invalid_argument("training_losses: prior stack needs a noise predictor and an x-t model");
  }
  const ComplexTensor4 y_meas = apply_mask(y0, m);
  const ComplexTensor4 y_acs = extract_acs(y_meas, m);

  ComplexTensor4 y_t = q_sample(y0, t, eps, sched);
  y_t = data_consistency(y_t, y_meas, m, dc.lambda_at(t, sched.T));

  const ComplexTensor4 eps_hat = priors.noise->predict(y_t, t);
  TrainingLosses out;
  {
    auto a = eps.samples();
    auto b = eps_hat.samples();
    for (std::size_t i = 0; i < a.size(); ++i) out.l_noise += std::norm(a[i] - b[i]);
  }
  const ComplexTensor4 clean = predict_clean(y_t, eps_hat, t, sched);
  const ComplexTensor4 clean_xt = fft2c(priors.xt->apply(ifft2c(clean), t));
  {
    auto a = y0.samples();
    auto b = clean_xt.samples();
    for (std::size_t i = 0; i < a.size(); ++i) out.l_xt += std::norm(a[i] - b[i]);
  }
  if (priors.kt) {
    const ComplexTensor4 acs_pred = apply_kt_kernel(y_acs, *priors.kt, nullptr);
    auto a = y_acs.samples();
    auto b = acs_pred.samples();
    for (std::size_t i = 0; i < a.size(); ++i) out.l_kt += std::norm(a[i] - b[i]);
  }
  out.total = out.l_noise + lambda_xt * out.l_xt + lambda_kt * out.l_kt;
  return out;
}

void write_diagnostics_csv(const std::vector<StepDiag> &diags, const std::string &path) {
  std::ofstream os(path);
  if (!os) throw TensorIoError("cannot open for write: " + path);
  os << "step,objective,nmse\n";
  char line[96];
  for (const auto &diag : diags) {
    std::snprintf(line, sizeof line, "%ld,%.17g,%.17g\n", diag.step, diag.objective, diag.nmse);
    os << line;
  }
}

} // namespace dynrec
