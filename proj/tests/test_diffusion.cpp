#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "diffusion.hpp"
#include "fft.hpp"
#include "oracles.hpp"
#include "phantom.hpp"
#include "sampling.hpp"

using namespace dynrec;

namespace {

struct Instance {
  ComplexTensor4 y0;
  SamplingMask mask;
  CoilSensitivities sens;
  ComplexTensor4 y_meas;
};

Instance standard_instance(std::int64_t n = 16, std::int64_t nt = 4, std::int64_t nc = 2,
                           std::uint64_t seed = 1) {
  Instance inst;
  PhantomSpec pspec;
  pspec.n_row = n;
  pspec.n_col = n;
  pspec.n_time = nt;
  pspec.seed = seed;
  inst.sens = synth_coilmaps(n, n, nc, seed);
  inst.y0 = fft2c(coil_expand(dynamic_phantom(pspec), inst.sens));
  MaskSpec ms;
  ms.n_row = n;
  ms.n_col = n;
  ms.n_time = nt;
  ms.accel = 2.5;
  ms.acs_frac = 0.2;
  ms.seed = seed;
  inst.mask = make_vd_mask(ms);
  inst.y_meas = apply_mask(inst.y0, inst.mask);
  return inst;
}

} // namespace

TEST_CASE("cosine schedule endpoints and monotonicity") {
  auto s1000 = cosine_schedule(1000);
  CHECK(s1000.alpha_bar[0] == 1.0);
  CHECK(s1000.alpha_bar[1000] < 1e-4);
  CHECK(s1000.alpha_bar[1000] == doctest::Approx(2.4287669070348567e-09).epsilon(1e-6));
  auto s50 = cosine_schedule(50);
  for (std::int64_t t = 1; t <= 50; ++t) {
    CHECK(s50.alpha_bar[t] < s50.alpha_bar[t - 1]);
    CHECK(s50.beta[t] >= 0.0);
    CHECK(s50.beta[t] <= 0.999);
    const double expect_sigma =
        std::sqrt((1.0 - s50.alpha_bar[t - 1]) / (1.0 - s50.alpha_bar[t]) * s50.beta[t]);
    CHECK(s50.sigma[t] == doctest::Approx(expect_sigma).epsilon(1e-12));
  }
  CHECK_THROWS_AS(cosine_schedule(1), std::invalid_argument);
}

TEST_CASE("q_sample: zero noise scales by sqrt(alpha_bar)") {
  auto sched = cosine_schedule(100);
  ComplexTensor4 y0 = oracle::random_tensor({1, 2, 4, 4}, 2);
  ComplexTensor4 eps(y0.dims());
  ComplexTensor4 y_t = q_sample(y0, 40, eps, sched);
  const double sa = std::sqrt(sched.alpha_bar[40]);
  for (std::int64_t i = 0; i < y0.size(); ++i) {
    CHECK(std::abs(y_t.samples()[i] - sa * y0.samples()[i]) < 1e-12);
  }
  CHECK_THROWS_AS(q_sample(y0, 0, eps, sched), std::out_of_range);
  CHECK_THROWS_AS(q_sample(y0, 101, eps, sched), std::out_of_range);
}

TEST_CASE("q_sample at t = T is statistically pure noise") {
  auto sched = cosine_schedule(1000);
  ComplexTensor4 y0({1, 1, 4, 4});
  for (auto &v : y0.samples()) v = Cplx(3.0, -2.0);
  Rng rng(7);
  ComplexTensor4 eps(y0.dims());
  rng.fill_cgauss(eps);
  ComplexTensor4 y_T = q_sample(y0, 1000, eps, sched);
  for (std::int64_t i = 0; i < y0.size(); ++i) {
    CHECK(std::abs(y_T.samples()[i] - eps.samples()[i]) < 2e-4 * std::abs(y0.samples()[i]) + 1e-12);
  }
}

TEST_CASE("q_sample Monte-Carlo variance matches 1 - alpha_bar") {
  auto sched = cosine_schedule(100);
  const std::int64_t t = 60;
  ComplexTensor4 y0({1, 1, 2, 2});
  for (auto &v : y0.samples()) v = Cplx(1.0, 1.0);
  Rng rng(123);
  const int draws = 10000;
  double acc = 0.0;
  for (int k = 0; k < draws; ++k) {
    ComplexTensor4 eps(y0.dims());
    rng.fill_cgauss(eps);
    ComplexTensor4 y_t = q_sample(y0, t, eps, sched);
    for (std::int64_t i = 0; i < 4; ++i) {
      acc += std::norm(y_t.samples()[i] - std::sqrt(sched.alpha_bar[t]) * y0.samples()[i]);
    }
  }
  const double var = acc / (4.0 * draws);
  CHECK(var == doctest::Approx(1.0 - sched.alpha_bar[t]).epsilon(0.05));
}

TEST_CASE("data consistency blends only sampled entries") {
  Instance inst = standard_instance();
  ComplexTensor4 y_t = oracle::random_tensor(inst.y0.dims(), 3);

  SUBCASE("lambda 1: hard replacement") {
    ComplexTensor4 out = data_consistency(y_t, inst.y_meas, inst.mask, 1.0);
    for (std::int64_t c = 0; c < 2; ++c) {
      for (std::int64_t t = 0; t < 4; ++t) {
        for (std::int64_t p = 0; p < 16 * 16; ++p) {
          if (inst.mask.frame(t)[p]) {
            CHECK(out.frame(c, t)[p] == inst.y_meas.frame(c, t)[p]);
          } else {
            CHECK(out.frame(c, t)[p] == y_t.frame(c, t)[p]);
          }
        }
      }
    }
  }
  SUBCASE("lambda 0: identity") {
    ComplexTensor4 out = data_consistency(y_t, inst.y_meas, inst.mask, 0.0);
    CHECK(oracle::rel_err(out, y_t) == 0.0);
  }
  SUBCASE("lambda 0.5 mixes arithmetically") {
    ComplexTensor4 out = data_consistency(y_t, inst.y_meas, inst.mask, 0.5);
    bool checked = false;
    for (std::int64_t t = 0; t < 4 && !checked; ++t) {
      for (std::int64_t p = 0; p < 256 && !checked; ++p) {
        if (inst.mask.frame(t)[p]) {
          const Cplx expect = 0.5 * y_t.frame(0, t)[p] + 0.5 * inst.y_meas.frame(0, t)[p];
          CHECK(std::abs(out.frame(0, t)[p] - expect) < 1e-15);
          checked = true;
        }
      }
    }
    CHECK(checked);
  }
}

TEST_CASE("predict_clean inverts q_sample across random steps") {
  auto sched = cosine_schedule(1000);
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t t = 1 + static_cast<std::int64_t>(rng.integer(1000));
    ComplexTensor4 y0 = oracle::random_tensor({1, 2, 4, 4}, 100 + trial);
    ComplexTensor4 eps(y0.dims());
    rng.fill_cgauss(eps);
    ComplexTensor4 y_t = q_sample(y0, t, eps, sched);
    CHECK(oracle::rel_err(predict_clean(y_t, eps, t, sched), y0) < 1e-5);
  }
  ComplexTensor4 y = oracle::random_tensor({1, 1, 2, 2}, 5);
  ComplexTensor4 zero(y.dims());
  ComplexTensor4 out = predict_clean(y, zero, 500, sched);
  const double inv = 1.0 / std::sqrt(sched.alpha_bar[500]);
  for (std::int64_t i = 0; i < y.size(); ++i) {
    CHECK(std::abs(out.samples()[i] - y.samples()[i] * inv) < 1e-9 * inv);
  }
}

TEST_CASE("reverse_step: coefficients and endpoints") {
  auto sched = cosine_schedule(1000);
  ComplexTensor4 y0 = oracle::random_tensor({1, 1, 4, 4}, 6);
  ComplexTensor4 z = oracle::random_tensor({1, 1, 4, 4}, 7);

  SUBCASE("small t: output collapses to y0 + sigma z when both inputs are y0") {
    for (std::int64_t t : {1, 2}) {
      ComplexTensor4 out = reverse_step(y0, y0, t, z, sched);
      double worst = 0.0;
      for (std::int64_t i = 0; i < y0.size(); ++i) {
        const Cplx expect = y0.samples()[i] + sched.sigma[t] * z.samples()[i];
        worst = std::max(worst, std::abs(out.samples()[i] - expect) / std::abs(y0.samples()[i]));
      }
      CHECK(worst < 1e-5);
    }
  }
  SUBCASE("zero inputs with zero z stay zero") {
    ComplexTensor4 zero({1, 1, 4, 4});
    ComplexTensor4 out = reverse_step(zero, zero, 10, zero, sched);
    CHECK(norm2(out) == 0.0);
  }
  SUBCASE("t = 1 with z = 0 is deterministic and equals the refined estimate") {
    // At t = 1 the state coefficient vanishes (alpha_bar[0] = 1).
    ComplexTensor4 y_t = oracle::random_tensor({1, 1, 4, 4}, 8);
    ComplexTensor4 zero({1, 1, 4, 4});
    ComplexTensor4 out = reverse_step(y_t, y0, 1, zero, sched);
    CHECK(oracle::rel_err(out, y0) < 1e-12);
  }
}

TEST_CASE("sampling loop with the oracle predictor reaches the ground truth") {
  Instance inst = standard_instance(16, 4, 2, 9);
  auto sched = cosine_schedule(50);
  PriorStack priors;
  priors.noise = std::make_shared<OraclePredictor>(inst.y0, sched);
  priors.xt = std::make_shared<IdentityXt>();
  SampleOptions opts;
  opts.cg_enabled = false;
  opts.seed = 77;
  opts.reference = &inst.y0;
  opts.collect_diagnostics = true;
  DCConfig dc;
  SampleResult res = sample(inst.y_meas, inst.mask, inst.sens, priors, sched, dc, opts);
  CHECK(nmse(res.y0, inst.y0) < 1e-3);

  // Sampled entries equal measurements bit-exactly after the terminal DC.
  for (std::int64_t c = 0; c < 2; ++c) {
    for (std::int64_t t = 0; t < 4; ++t) {
      for (std::int64_t p = 0; p < 256; ++p) {
        if (inst.mask.frame(t)[p]) {
          CHECK(res.y0.frame(c, t)[p] == inst.y_meas.frame(c, t)[p]);
        }
      }
    }
  }

  // NMSE diagnostic is non-increasing over the last half of the run.
  REQUIRE(res.diags.size() == 50);
  for (std::size_t i = 26; i < res.diags.size(); ++i) {
    CHECK(res.diags[i].nmse <= res.diags[i - 1].nmse * (1.0 + 1e-9) + 1e-12);
  }
}

TEST_CASE("sampling loop is deterministic under a fixed seed") {
  Instance inst = standard_instance(8, 2, 2, 10);
  auto sched = cosine_schedule(10);
  PriorStack priors;
  priors.noise = std::make_shared<ZeroPredictor>();
  priors.xt = std::make_shared<XfSoftThreshold>(1e-3);
  SampleOptions opts;
  opts.cg_enabled = true;
  opts.cg.max_iters = 3;
  opts.cg.lambda_td = 0.015;
  opts.seed = 5;
  DCConfig dc;
  SampleResult a = sample(inst.y_meas, inst.mask, inst.sens, priors, sched, dc, opts);
  SampleResult b = sample(inst.y_meas, inst.mask, inst.sens, priors, sched, dc, opts);
  auto sa = a.y0.samples(), sb = b.y0.samples();
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i] == sb[i]);

  SampleOptions other = opts;
  other.seed = 6;
  SampleResult c = sample(inst.y_meas, inst.mask, inst.sens, priors, sched, dc, other);
  CHECK(oracle::rel_err(c.y0, a.y0) > 0.0);
}

TEST_CASE("all-ones mask with hard DC pins sampled entries to the measurement") {
  Instance inst = standard_instance(8, 2, 1, 11);
  SamplingMask full;
  full.n_time = 2;
  full.n_row = 8;
  full.n_col = 8;
  full.m.assign(2 * 64, 1);
  ComplexTensor4 meas = apply_mask(inst.y0, full);
  auto sched = cosine_schedule(5);
  PriorStack priors;
  priors.noise = std::make_shared<ZeroPredictor>();
  priors.xt = std::make_shared<IdentityXt>();
  SampleOptions opts;
  opts.cg_enabled = false;
  opts.seed = 3;
  DCConfig dc;
  SampleResult res = sample(meas, full, inst.sens, priors, sched, dc, opts);
  auto sr = res.y0.samples(), sm = meas.samples();
  for (std::size_t i = 0; i < sr.size(); ++i) CHECK(sr[i] == sm[i]);
}

TEST_CASE("training losses: oracle predictor and identity priors vanish") {
  Instance inst = standard_instance(16, 4, 2, 12);
  auto sched = cosine_schedule(100);
  PriorStack priors;
  priors.noise = std::make_shared<OraclePredictor>(inst.y0, sched);
  priors.xt = std::make_shared<IdentityXt>();
  Rng rng(13);
  ComplexTensor4 eps(inst.y0.dims());
  rng.fill_cgauss(eps);
  DCConfig dc;
  dc.lambda = 0.0; // keep y_t on the pure q_sample path so the oracle is exact
  TrainingLosses l = training_losses(inst.y0, inst.mask, 40, eps, priors, sched, dc, 1.0, 1.0);
  CHECK(l.l_noise < 1e-18 * norm2(eps) * norm2(eps));
  CHECK(l.l_xt < 1e-12);
  CHECK(l.l_kt == 0.0);
  CHECK(l.total == l.l_noise + l.l_xt + l.l_kt);
}

TEST_CASE("training losses: zero predictor yields the noise energy") {
  Instance inst = standard_instance(8, 2, 1, 14);
  auto sched = cosine_schedule(50);
  PriorStack priors;
  priors.noise = std::make_shared<ZeroPredictor>();
  priors.xt = std::make_shared<IdentityXt>();
  Rng rng(15);
  ComplexTensor4 eps(inst.y0.dims());
  rng.fill_cgauss(eps);
  DCConfig dc;
  dc.lambda = 0.0;
  TrainingLosses l = training_losses(inst.y0, inst.mask, 25, eps, priors, sched, dc, 1.0, 1.0);
  double eps_energy = 0.0;
  for (const auto &v : eps.samples()) eps_energy += std::norm(v);
  CHECK(l.l_noise == doctest::Approx(eps_energy).epsilon(1e-12));
}

TEST_CASE("training losses: weights combine linearly and the kt term responds") {
  Instance inst = standard_instance(16, 4, 2, 16);
  auto sched = cosine_schedule(100);
  PriorStack priors;
  priors.noise = std::make_shared<ZeroPredictor>();
  priors.xt = std::make_shared<IdentityXt>();
  const ComplexTensor4 acs = extract_acs(inst.y_meas, inst.mask);
  priors.kt = fit_kt_kernel(acs, {3, 3, 3}, 1e-6);
  Rng rng(17);
  ComplexTensor4 eps(inst.y0.dims());
  rng.fill_cgauss(eps);
  DCConfig dc;
  TrainingLosses l1 = training_losses(inst.y0, inst.mask, 30, eps, priors, sched, dc, 1.0, 1.0);
  CHECK(l1.total == doctest::Approx(l1.l_noise + l1.l_xt + l1.l_kt).epsilon(1e-12));
  CHECK(l1.l_kt > 0.0);
  TrainingLosses l2 = training_losses(inst.y0, inst.mask, 30, eps, priors, sched, dc, 0.5, 2.0);
  CHECK(l2.total == doctest::Approx(l2.l_noise + 0.5 * l2.l_xt + 2.0 * l2.l_kt).epsilon(1e-12));

  SamplingMask no_acs = inst.mask;
  no_acs.acs_first = -1;
  no_acs.acs_count = 0;
  CHECK_THROWS_AS(extract_acs(inst.y_meas, no_acs), std::invalid_argument);
}

TEST_CASE("linear ramp DC schedule interpolates lambda") {
  DCConfig dc;
  dc.mode = DCMode::LinearRamp;
  dc.lambda = 0.2;
  CHECK(dc.lambda_at(1, 100) == doctest::Approx(0.2));
  CHECK(dc.lambda_at(100, 100) == doctest::Approx(1.0));
  CHECK(dc.lambda_at(50, 100) > 0.2);
  DCConfig flat;
  flat.lambda = 0.7;
  CHECK(flat.lambda_at(1, 100) == 0.7);
  CHECK(flat.lambda_at(100, 100) == 0.7);
}
