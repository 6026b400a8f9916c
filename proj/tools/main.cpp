// dynrec: dynamic MRI reconstruction pipeline driver.
//
// Batch, non-interactive design: progress goes to stderr, results go to
// files, exit code 0 on success. Every subcommand is deterministic for a
// fixed seed at any --threads setting.

#include "cg.hpp"
#include "diffusion.hpp"
#include "encoding.hpp"
#include "fft.hpp"
#include "grog.hpp"
#include "image_export.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "phantom.hpp"
#include "priors.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "tensor.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

using namespace dynrec;
namespace fs = std::filesystem;

namespace {

void ensure_writable(const std::string &base, bool force,
                     const std::vector<std::string> &suffixes = {".hdr", ".cplx"}) {
  if (force) return;
  for (const auto &s : suffixes) {
    if (fs::exists(base + s)) {
      throw std::runtime_error("refusing to overwrite " + base + s + " (use --force)");
    }
  }
}

PhantomMode parse_phantom_mode(const std::string &s) {
  if (s == "cardiac") return PhantomMode::Cardiac;
  if (s == "respiratory") return PhantomMode::Respiratory;
  throw CLI::ValidationError("--mode", "expected cardiac or respiratory");
}

struct PhantomFlags {
  std::int64_t rows = 64, cols = 64, frames = 8;
  std::string mode = "cardiac";
  double amplitude = 0.15;
  double period = 8.0;
  std::uint64_t seed = 0;

  PhantomSpec spec() const {
    PhantomSpec p;
    p.n_row = rows;
    p.n_col = cols;
    p.n_time = frames;
    p.mode = parse_phantom_mode(mode);
    p.amplitude = amplitude;
    p.period = period;
    p.seed = seed;
    return p;
  }

  void attach(CLI::App *cmd) {
    cmd->add_option("--rows", rows, "image rows");
    cmd->add_option("--cols", cols, "image columns");
    cmd->add_option("--frames", frames, "number of time frames");
    cmd->add_option("--mode", mode, "cardiac|respiratory")->capture_default_str();
    cmd->add_option("--amplitude", amplitude, "motion amplitude");
    cmd->add_option("--period", period, "motion period (frames, or spokes for radial)");
    cmd->add_option("--seed", seed, "generator seed")->envname("DYNREC_SEED");
  }
};

ComplexTensor4 load_image_or_kspace(const std::string &path) { return load_cplx(path); }

std::shared_ptr<const NoisePredictor> make_predictor(const std::string &spec,
                                                     const NoiseSchedule &sched) {
  if (spec == "zero") return std::make_shared<ZeroPredictor>();
  if (spec.rfind("oracle:", 0) == 0) {
    return std::make_shared<OraclePredictor>(load_cplx(spec.substr(7)), sched);
  }
  throw std::runtime_error("unknown predictor '" + spec + "' (expected zero or oracle:<path>)");
}

int run(int argc, char **argv) {
  CLI::App app{"dynamic MRI reconstruction pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key = value config with one section per subcommand");
  app.allow_config_extras(false);

  int threads = 0;
  app.add_option("--threads", threads, "worker threads for slice-level parallelism (0 = auto)");
  // Subcommand callbacks fire before the root callback, so each one applies
  // the thread setting itself.
  auto apply_threads = [&threads] {
    if (threads > 0) set_thread_count(threads);
  };

  // ---- phantom ----------------------------------------------------------
  auto *cmd_phantom = app.add_subcommand("phantom", "generate a dynamic phantom image sequence");
  PhantomFlags ph;
  ph.attach(cmd_phantom);
  std::string ph_out;
  bool ph_force = false;
  cmd_phantom->add_option("--out", ph_out, "output tensor base path")->required();
  cmd_phantom->add_flag("--force", ph_force, "overwrite existing files");
  cmd_phantom->callback([&] {
    apply_threads();
    ensure_writable(ph_out, ph_force);
    ComplexTensor4 x = dynamic_phantom(ph.spec());
    save_cplx(x, ph_out, {{"kind", "image-sequence"}, {"seed", std::to_string(ph.seed)}});
    std::cerr << "phantom: dims " << x.dims().str() << " seed " << ph.seed << "\n";
  });

  // ---- coilmaps ---------------------------------------------------------
  auto *cmd_maps = app.add_subcommand("coilmaps", "generate normalised synthetic coil maps");
  std::int64_t cm_rows = 64, cm_cols = 64, cm_coils = 4;
  std::uint64_t cm_seed = 0;
  std::string cm_out;
  bool cm_force = false;
  cmd_maps->add_option("--rows", cm_rows, "map rows");
  cmd_maps->add_option("--cols", cm_cols, "map columns");
  cmd_maps->add_option("--coils", cm_coils, "number of coils");
  cmd_maps->add_option("--seed", cm_seed, "generator seed")->envname("DYNREC_SEED");
  cmd_maps->add_option("--out", cm_out, "output tensor base path")->required();
  cmd_maps->add_flag("--force", cm_force, "overwrite existing files");
  cmd_maps->callback([&] {
    apply_threads();
    ensure_writable(cm_out, cm_force);
    save_coilmaps(synth_coilmaps(cm_rows, cm_cols, cm_coils, cm_seed), cm_out);
    std::cerr << "coilmaps: dims " << cm_coils << "," << 1 << "," << cm_rows << "," << cm_cols
              << " seed " << cm_seed << "\n";
  });

  // ---- mask -------------------------------------------------------------
  auto *cmd_mask = app.add_subcommand("mask", "generate a 1D variable-density Cartesian mask");
  MaskSpec msk;
  std::string mask_out;
  bool mask_force = false;
  cmd_mask->add_option("--rows", msk.n_row, "k-space rows")->required();
  cmd_mask->add_option("--cols", msk.n_col, "k-space columns")->required();
  cmd_mask->add_option("--frames", msk.n_time, "number of frames")->required();
  cmd_mask->add_option("--accel", msk.accel, "acceleration factor")->capture_default_str();
  cmd_mask->add_option("--acs-frac", msk.acs_frac, "ACS fraction of rows")->capture_default_str();
  cmd_mask->add_option("--density-power", msk.density_power, "variable-density exponent")
      ->capture_default_str();
  bool shared_pattern = false;
  cmd_mask->add_flag("--shared-pattern", shared_pattern, "reuse one pattern for all frames");
  cmd_mask->add_option("--seed", msk.seed, "sampling seed")->envname("DYNREC_SEED");
  cmd_mask->add_option("--out", mask_out, "output mask base path")->required();
  cmd_mask->add_flag("--force", mask_force, "overwrite existing files");
  cmd_mask->callback([&] {
    apply_threads();
    ensure_writable(mask_out, mask_force);
    msk.per_frame = !shared_pattern;
    SamplingMask m = make_vd_mask(msk);
    save_mask(m, mask_out);
    std::cerr << "mask: dims 1," << m.n_time << "," << m.n_row << "," << m.n_col << " rows/frame "
              << m.popcount() / (m.n_time * m.n_col) << " acs " << m.acs_count << " seed "
              << msk.seed << "\n";
  });

  // ---- acquire ----------------------------------------------------------
  auto *cmd_acquire = app.add_subcommand("acquire", "simulate data acquisition");
  auto *acq_cart = cmd_acquire->add_subcommand("cartesian", "apply A = MFS to a saved phantom");
  std::string ac_phantom, ac_maps, ac_mask, ac_out;
  double ac_noise = 0.0;
  std::uint64_t ac_seed = 0;
  bool ac_force = false;
  acq_cart->add_option("--phantom", ac_phantom, "image sequence path")->required();
  acq_cart->add_option("--maps", ac_maps, "coil maps path")->required();
  acq_cart->add_option("--mask", ac_mask, "sampling mask path")->required();
  acq_cart->add_option("--noise-sd", ac_noise, "complex noise standard deviation");
  acq_cart->add_option("--seed", ac_seed, "noise seed")->envname("DYNREC_SEED");
  acq_cart->add_option("--out", ac_out, "output k-space base path")->required();
  acq_cart->add_flag("--force", ac_force, "overwrite existing files");
  acq_cart->callback([&] {
    apply_threads();
    ensure_writable(ac_out, ac_force);
    EncodingOperator op{load_coilmaps(ac_maps), load_mask(ac_mask)};
    ComplexTensor4 y = forward(op, load_image_or_kspace(ac_phantom));
    if (ac_noise > 0.0) {
      Rng rng(ac_seed);
      ComplexTensor4 noise(y.dims());
      rng.fill_cgauss(noise);
      noise = apply_mask(noise, op.mask);
      for (std::int64_t i = 0; i < y.size(); ++i) {
        y.samples()[i] += ac_noise * noise.samples()[i];
      }
    }
    std::map<std::string, std::string> meta{{"kind", "kspace"}};
    if (op.mask.has_acs()) {
      meta["acs_first"] = std::to_string(op.mask.acs_first);
      meta["acs_count"] = std::to_string(op.mask.acs_count);
    }
    save_cplx(y, ac_out, meta);
    std::cerr << "acquire cartesian: dims " << y.dims().str() << " seed " << ac_seed << "\n";
  });

  auto *acq_rad = cmd_acquire->add_subcommand("radial", "golden-angle acquisition of a moving phantom");
  PhantomFlags rad_ph;
  rad_ph.mode = "respiratory";
  rad_ph.amplitude = 4.0;
  rad_ph.period = 200.0;
  rad_ph.attach(acq_rad);
  std::string rad_maps, rad_out;
  std::int64_t rad_spokes = 600, rad_readout = 0;
  double rad_noise = 0.0, rad_interval = 0.003;
  bool rad_force = false;
  acq_rad->add_option("--maps", rad_maps, "coil maps path")->required();
  acq_rad->add_option("--spokes", rad_spokes, "number of golden-angle spokes");
  acq_rad->add_option("--readout", rad_readout, "readout samples per spoke (0 = 2*rows)");
  acq_rad->add_option("--noise-sd", rad_noise, "complex noise standard deviation");
  acq_rad->add_option("--spoke-interval", rad_interval, "seconds between spokes");
  acq_rad->add_option("--out", rad_out, "output acquisition base path")->required();
  acq_rad->add_flag("--force", rad_force, "overwrite existing files");
  acq_rad->callback([&] {
    apply_threads();
    ensure_writable(rad_out, rad_force, {".hdr", ".cplx", ".traj.csv"});
    CoilSensitivities sens = load_coilmaps(rad_maps);
    PhantomSpec spec = rad_ph.spec();
    spec.n_row = sens.n_row;
    spec.n_col = sens.n_col;
    const std::int64_t readout = rad_readout > 0 ? rad_readout : 2 * sens.n_row;
    auto traj = golden_angle_trajectory(rad_spokes, readout);
    const double cycle_s = spec.period * rad_interval; // period is in spokes
    auto gen = [&](double t_s) { return phantom_frame(spec, t_s / cycle_s); };
    RadialAcquisition acq = acquire_radial(gen, traj, sens, rad_noise, rad_ph.seed, rad_interval);
    save_radial(acq, rad_out);
    std::cerr << "acquire radial: " << rad_spokes << " spokes x " << readout << " readouts, "
              << sens.n_coil << " coils, seed " << rad_ph.seed << "\n";
  });
  cmd_acquire->require_subcommand(1);

  // ---- bin --------------------------------------------------------------
  auto *cmd_bin = app.add_subcommand("bin", "motion-state binning of a radial acquisition");
  std::string bin_acq, bin_out, bin_mode = "sliding";
  std::int64_t bin_states = 6, bin_window = 283, bin_smooth = 31;
  bool bin_force = false;
  cmd_bin->add_option("--acq", bin_acq, "radial acquisition base path")->required();
  cmd_bin->add_option("--states", bin_states, "number of motion states")->capture_default_str();
  cmd_bin->add_option("--window", bin_window, "spokes per bin")->capture_default_str();
  cmd_bin->add_option("--bin-mode", bin_mode, "fixed|sliding")->capture_default_str();
  cmd_bin->add_option("--smooth", bin_smooth, "motion-signal smoothing length (odd)")
      ->capture_default_str();
  cmd_bin->add_option("--out", bin_out, "output bin plan path")->required();
  cmd_bin->add_flag("--force", bin_force, "overwrite existing files");
  cmd_bin->callback([&] {
    apply_threads();
    ensure_writable(bin_out, bin_force, {""});
    RadialAcquisition acq = load_radial(bin_acq);
    MotionSignal sig = estimate_motion_signal(acq, bin_smooth);
    const BinMode mode = bin_mode == "fixed" ? BinMode::Fixed : BinMode::Sliding;
    if (bin_mode != "fixed" && bin_mode != "sliding") {
      throw std::runtime_error("unknown bin mode '" + bin_mode + "'");
    }
    BinPlan plan = bin_spokes(sig, bin_states, bin_window, mode);
    save_binplan(plan, bin_out);
    std::cerr << "bin: " << plan.bins.size() << " states x " << bin_window << " spokes\n";
  });

  // ---- grog -------------------------------------------------------------
  auto *cmd_grog = app.add_subcommand("grog", "self-calibrating GROG gridding");
  std::string gg_acq, gg_out, gg_plan;
  std::int64_t gg_grid = 0, gg_state = -1, gg_subset = 0;
  std::uint64_t gg_seed = 0;
  double gg_ridge = 1e-6;
  bool gg_force = false;
  cmd_grog->add_option("--acq", gg_acq, "radial acquisition base path")->required();
  cmd_grog->add_option("--grid", gg_grid, "Cartesian grid size (0 = readout/2)");
  cmd_grog->add_option("--ridge", gg_ridge, "calibration ridge")->capture_default_str();
  cmd_grog->add_option("--bin-plan", gg_plan, "bin plan: grid each state as one frame");
  cmd_grog->add_option("--state", gg_state, "grid only this state of the bin plan");
  cmd_grog->add_option("--subset", gg_subset, "random spoke subset per state (0 = all)");
  cmd_grog->add_option("--seed", gg_seed, "subset selection seed")->envname("DYNREC_SEED");
  cmd_grog->add_option("--out", gg_out, "output base path (writes .grid/.mask/.hits)")->required();
  cmd_grog->add_flag("--force", gg_force, "overwrite existing files");
  cmd_grog->callback([&] {
    apply_threads();
    ensure_writable(gg_out + ".grid", gg_force);
    ensure_writable(gg_out + ".mask", gg_force);
    RadialAcquisition acq = load_radial(gg_acq);
    const std::int64_t grid = gg_grid > 0 ? gg_grid : acq.traj.n_readout / 2;
    GrogOperators ops = calibrate_grog(acq, grid, gg_ridge);
    save_grog(ops, gg_out + ".ops");

    std::vector<std::vector<std::int64_t>> groups;
    if (!gg_plan.empty()) {
      BinPlan plan = load_binplan(gg_plan);
      for (std::size_t i = 0; i < plan.bins.size(); ++i) {
        if (gg_state >= 0 && static_cast<std::int64_t>(i) != gg_state) continue;
        groups.push_back(plan.bins[i].spokes);
      }
    } else {
      std::vector<std::int64_t> all(static_cast<std::size_t>(acq.traj.n_spokes));
      for (std::int64_t i = 0; i < acq.traj.n_spokes; ++i) all[static_cast<std::size_t>(i)] = i;
      groups.push_back(std::move(all));
    }

    Rng rng(gg_seed);
    ComplexTensor4 grid_all({acq.n_coil, static_cast<std::int64_t>(groups.size()), grid, grid});
    SamplingMask mask_all;
    mask_all.n_time = static_cast<std::int64_t>(groups.size());
    mask_all.n_row = grid;
    mask_all.n_col = grid;
    mask_all.m.assign(static_cast<std::size_t>(mask_all.n_time * grid * grid), 0);
    ComplexTensor4 hits_all({1, static_cast<std::int64_t>(groups.size()), grid, grid});
    std::int64_t dropped = 0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      std::vector<std::int64_t> spokes = groups[gi];
      if (gg_subset > 0 && gg_subset < static_cast<std::int64_t>(spokes.size())) {
        // Fisher-Yates prefix selection, then restore acquisition order.
        for (std::int64_t i = 0; i < gg_subset; ++i) {
          const std::int64_t j =
              i + static_cast<std::int64_t>(rng.integer(spokes.size() - static_cast<std::size_t>(i)));
          std::swap(spokes[static_cast<std::size_t>(i)], spokes[static_cast<std::size_t>(j)]);
        }
        spokes.resize(static_cast<std::size_t>(gg_subset));
        std::sort(spokes.begin(), spokes.end());
      }
      GriddedKSpace gk = grid_radial(sort_bin_to_kspace(acq, spokes), ops, grid);
      dropped += gk.dropped;
      for (std::int64_t c = 0; c < acq.n_coil; ++c) {
        std::copy(gk.grid.frame(c, 0), gk.grid.frame(c, 0) + grid * grid,
                  grid_all.frame(c, static_cast<std::int64_t>(gi)));
      }
      for (std::int64_t p = 0; p < grid * grid; ++p) {
        mask_all.m[static_cast<std::size_t>(gi) * grid * grid + static_cast<std::size_t>(p)] =
            gk.hit_count[static_cast<std::size_t>(p)] > 0 ? 1 : 0;
        hits_all.frame(0, static_cast<std::int64_t>(gi))[p] =
            Cplx(static_cast<double>(gk.hit_count[static_cast<std::size_t>(p)]), 0.0);
      }
    }
    save_cplx(grid_all, gg_out + ".grid", {{"kind", "kspace"}});
    save_mask(mask_all, gg_out + ".mask");
    save_cplx(hits_all, gg_out + ".hits", {{"kind", "hit-count"}});
    std::cerr << "grog: " << groups.size() << " frame(s) on a " << grid << "x" << grid
              << " grid, dropped " << dropped << " sample(s)\n";
  });

  // ---- ktfit ------------------------------------------------------------
  auto *cmd_ktfit = app.add_subcommand("ktfit", "fit the k-t self-consistency kernel from ACS data");
  std::string kt_in, kt_mask, kt_out;
  std::int64_t kt_t = 3, kt_y = 3, kt_x = 3;
  double kt_ridge = 1e-6;
  bool kt_force = false;
  cmd_ktfit->add_option("--input", kt_in, "measured k-space base path")->required();
  cmd_ktfit->add_option("--mask", kt_mask, "sampling mask with ACS rows")->required();
  cmd_ktfit->add_option("--kt", kt_t, "kernel taps along time")->capture_default_str();
  cmd_ktfit->add_option("--ky", kt_y, "kernel taps along rows")->capture_default_str();
  cmd_ktfit->add_option("--kx", kt_x, "kernel taps along columns")->capture_default_str();
  cmd_ktfit->add_option("--ridge", kt_ridge, "ridge weight")->capture_default_str();
  cmd_ktfit->add_option("--out", kt_out, "output kernel base path")->required();
  cmd_ktfit->add_flag("--force", kt_force, "overwrite existing files");
  cmd_ktfit->callback([&] {
    apply_threads();
    ensure_writable(kt_out, kt_force, {".hdr", ".cplx", ".kernel.json"});
    ComplexTensor4 y = load_cplx(kt_in);
    SamplingMask m = load_mask(kt_mask);
    KtKernel k = fit_kt_kernel(extract_acs(y, m), {kt_t, kt_y, kt_x}, kt_ridge);
    save_kt_kernel(k, kt_out);
    std::cerr << "ktfit: " << k.n_coil << " coils, " << kt_t << "x" << kt_y << "x" << kt_x
              << " taps\n";
  });

  // ---- recon ------------------------------------------------------------
  auto *cmd_recon = app.add_subcommand("recon", "reconstruct an image sequence");
  cmd_recon->require_subcommand(1);
  std::string rc_in, rc_mask, rc_maps, rc_out;
  bool rc_force = false;
  auto add_recon_io = [&](CLI::App *sub) {
    sub->add_option("--input", rc_in, "measured k-space base path")->required();
    sub->add_option("--mask", rc_mask, "sampling mask path")->required();
    sub->add_option("--maps", rc_maps, "coil maps path")->required();
    sub->add_option("--out", rc_out, "output image base path")->required();
    sub->add_flag("--force", rc_force, "overwrite existing files");
  };

  auto *rc_zf = cmd_recon->add_subcommand("zero-filled", "adjoint reconstruction A^H y");
  add_recon_io(rc_zf);
  rc_zf->callback([&] {
    apply_threads();
    ensure_writable(rc_out, rc_force);
    EncodingOperator op{load_coilmaps(rc_maps), load_mask(rc_mask)};
    ComplexTensor4 img = adjoint(op, load_cplx(rc_in));
    save_cplx(img, rc_out, {{"kind", "image-sequence"}});
    std::cerr << "recon zero-filled: dims " << img.dims().str() << "\n";
  });

  auto *rc_cg = cmd_recon->add_subcommand("cg", "CS baseline: CG with temporal total variation");
  add_recon_io(rc_cg);
  CGConfig cs_cfg;
  std::string cg_history;
  rc_cg->add_option("--lambda-td", cs_cfg.lambda_td, "temporal TV weight")->capture_default_str();
  rc_cg->add_option("--iters", cs_cfg.max_iters, "CG iterations")->capture_default_str();
  rc_cg->add_option("--mu", cs_cfg.smooth_mu, "TV smoothing (0 = auto)");
  bool cg_noncirc = false;
  rc_cg->add_flag("--open-time", cg_noncirc, "non-circular temporal differences");
  rc_cg->add_option("--history", cg_history, "objective history CSV path");
  rc_cg->callback([&] {
    apply_threads();
    ensure_writable(rc_out, rc_force);
    EncodingOperator op{load_coilmaps(rc_maps), load_mask(rc_mask)};
    CGConfig cfg = cs_cfg;
    cfg.circular_time = !cg_noncirc;
    ComplexTensor4 y = load_cplx(rc_in);
    CGResult res = cg_refine(apply_mask(y, op.mask), y, op.mask, op.sens, cfg);
    if (!cg_history.empty()) write_cg_history_csv(res.history, cg_history);
    ComplexTensor4 img = coil_combine(ifft2c(res.y), op.sens);
    save_cplx(img, rc_out, {{"kind", "image-sequence"}});
    std::cerr << "recon cg: " << res.history.size() << " iterations"
              << (res.stalled ? " (stalled)" : "") << "\n";
  });

  auto *rc_diff = cmd_recon->add_subcommand("diffusion", "reverse-diffusion reconstruction");
  add_recon_io(rc_diff);
  std::int64_t df_steps = 1000;
  double df_lambda_dc = 1.0, df_lambda_td = 0.015, df_xt_tau = 0.0;
  std::string df_dc_mode = "constant", df_xt = "xf-soft", df_kt = "none";
  std::string df_predictor = "zero", df_diag, df_reference;
  std::int64_t df_cg_iters = 4;
  bool df_no_cg = false, df_no_terminal_dc = false;
  std::uint64_t df_seed = 0;
  rc_diff->add_option("--steps", df_steps, "diffusion steps T")->capture_default_str();
  rc_diff->add_option("--lambda-dc", df_lambda_dc, "DC mixing weight")->capture_default_str();
  rc_diff->add_option("--dc-mode", df_dc_mode, "constant|ramp")->capture_default_str();
  rc_diff->add_option("--lambda-td", df_lambda_td, "temporal TV weight in the CG layer")
      ->capture_default_str();
  rc_diff->add_option("--xt", df_xt, "x-t prior: identity|xf-soft")->capture_default_str();
  rc_diff->add_option("--xt-tau", df_xt_tau, "xf-soft base threshold (0 = auto)");
  double df_xt_noise_scale = 2.0;
  rc_diff->add_option("--xt-noise-scale", df_xt_noise_scale,
                      "xf-soft threshold boost per unit clean-estimate noise std")
      ->capture_default_str();
  rc_diff->add_option("--kt", df_kt, "k-t prior: none|fit|<kernel path>")->capture_default_str();
  rc_diff->add_option("--predictor", df_predictor, "zero|oracle:<path>")->capture_default_str();
  rc_diff->add_option("--cg-iters", df_cg_iters, "CG iterations per step")->capture_default_str();
  rc_diff->add_flag("--no-cg", df_no_cg, "disable the CG refinement layer");
  rc_diff->add_flag("--no-terminal-dc", df_no_terminal_dc, "skip the final DC projection");
  rc_diff->add_option("--seed", df_seed, "sampling seed")->envname("DYNREC_SEED");
  rc_diff->add_option("--diagnostics", df_diag, "per-step diagnostics CSV path");
  rc_diff->add_option("--reference", df_reference, "ground-truth k-space for NMSE diagnostics");
  rc_diff->callback([&] {
    apply_threads();
    ensure_writable(rc_out, rc_force);
    EncodingOperator op{load_coilmaps(rc_maps), load_mask(rc_mask)};
    ComplexTensor4 y = apply_mask(load_cplx(rc_in), op.mask);
    NoiseSchedule sched = cosine_schedule(df_steps);

    PriorStack priors;
    priors.noise = make_predictor(df_predictor, sched);
    if (df_xt == "identity") {
      priors.xt = std::make_shared<IdentityXt>();
    } else if (df_xt == "xf-soft") {
      double tau = df_xt_tau;
      if (tau <= 0.0) {
        // Default threshold: a small fraction of the zero-filled image scale.
        ComplexTensor4 zf = coil_combine(ifft2c(y), op.sens);
        double peak = 0.0;
        for (const auto &v : zf.samples()) peak = std::max(peak, std::abs(v));
        tau = 0.02 * peak;
      }
      priors.xt = std::make_shared<XfSoftThreshold>(tau, sched.alpha_bar, df_xt_noise_scale);
    } else {
      throw std::runtime_error("unknown x-t prior '" + df_xt + "'");
    }
    if (df_kt == "fit") {
      priors.kt = fit_kt_kernel(extract_acs(y, op.mask), {3, 3, 3}, 1e-6);
    } else if (df_kt != "none") {
      priors.kt = load_kt_kernel(df_kt);
    }

    DCConfig dc;
    dc.mode = df_dc_mode == "ramp" ? DCMode::LinearRamp : DCMode::Constant;
    dc.lambda = df_lambda_dc;
    SampleOptions opts;
    opts.cg_enabled = !df_no_cg;
    opts.cg.max_iters = df_cg_iters;
    opts.cg.lambda_td = df_lambda_td;
    opts.terminal_dc = !df_no_terminal_dc;
    opts.seed = df_seed;
    opts.collect_diagnostics = !df_diag.empty();
    ComplexTensor4 reference;
    if (!df_reference.empty()) {
      reference = load_cplx(df_reference);
      opts.reference = &reference;
    }
    SampleResult res = sample(y, op.mask, op.sens, priors, sched, dc, opts);
    if (!df_diag.empty()) write_diagnostics_csv(res.diags, df_diag);
    ComplexTensor4 img = coil_combine(ifft2c(res.y0), op.sens);
    save_cplx(img, rc_out, {{"kind", "image-sequence"}, {"seed", std::to_string(df_seed)}});
    std::cerr << "recon diffusion: T = " << df_steps << ", seed " << df_seed << "\n";
  });

  // ---- metrics ----------------------------------------------------------
  auto *cmd_metrics = app.add_subcommand("metrics", "score a reconstruction against a reference");
  std::string mt_in, mt_ref, mt_out;
  cmd_metrics->add_option("--input", mt_in, "reconstructed image base path")->required();
  cmd_metrics->add_option("--reference", mt_ref, "reference image base path")->required();
  cmd_metrics->add_option("--out", mt_out, "metrics CSV path")->required();
  cmd_metrics->callback([&] {
    apply_threads();
    MetricReport r = compute_metrics(load_cplx(mt_in), load_cplx(mt_ref));
    write_metrics_csv(r, mt_out);
    std::cerr << "metrics: psnr " << r.psnr_mean << " ssim " << r.ssim_mean << " nmse "
              << r.nmse_mean << " tenengrad " << r.tenengrad_mean << "\n";
  });

  // ---- export -----------------------------------------------------------
  auto *cmd_export = app.add_subcommand("export", "write 8-bit PGM frames and x-t profiles");
  std::string ex_in, ex_prefix;
  std::int64_t ex_prow = -1, ex_pcol = -1;
  cmd_export->add_option("--input", ex_in, "image sequence base path")->required();
  cmd_export->add_option("--out-prefix", ex_prefix, "output file prefix")->required();
  cmd_export->add_option("--profile-row", ex_prow, "emit an x-t profile along this row");
  cmd_export->add_option("--profile-col", ex_pcol, "emit an x-t profile along this column");
  cmd_export->callback([&] {
    apply_threads();
    ComplexTensor4 x = load_cplx(ex_in);
    export_frames(x, ex_prefix);
    if (ex_prow >= 0) {
      std::int64_t rows, cols;
      auto prof = xt_profile(x, ProfileAxis::Row, ex_prow, &rows, &cols);
      write_pgm(ex_prefix + "_xt_row" + std::to_string(ex_prow) + ".pgm", prof, rows, cols);
    }
    if (ex_pcol >= 0) {
      std::int64_t rows, cols;
      auto prof = xt_profile(x, ProfileAxis::Col, ex_pcol, &rows, &cols);
      write_pgm(ex_prefix + "_xt_col" + std::to_string(ex_pcol) + ".pgm", prof, rows, cols);
    }
    std::cerr << "export: " << x.dims().time << " frame(s)\n";
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
