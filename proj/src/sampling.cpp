#include "sampling.hpp"

#include "parallel.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dynrec {

namespace {

std::vector<std::int64_t> draw_rows(Rng &rng, const std::vector<std::int64_t> &pool,
                                    const std::vector<double> &weight, std::int64_t count) {
  std::vector<std::int64_t> chosen;
  std::vector<char> taken(pool.size(), 0);
  chosen.reserve(static_cast<std::size_t>(count));
  for (std::int64_t n = 0; n < count; ++n) {
    double total = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!taken[i]) total += weight[i];
    }
    double u = rng.uniform() * total;
    std::size_t pick = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i]) continue;
      u -= weight[i];
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    if (pick == pool.size()) { // numeric tail: take the last free slot
      for (std::size_t i = pool.size(); i-- > 0;) {
        if (!taken[i]) {
          pick = i;
          break;
        }
      }
    }
    taken[pick] = 1;
    chosen.push_back(pool[pick]);
  }
  return chosen;
}

} // namespace

SamplingMask make_vd_mask(const MaskSpec &spec) {
  if (spec.accel < 1.0) throw std::invalid_argument("make_vd_mask: accel must be >= 1");
  const std::int64_t budget =
      static_cast<std::int64_t>(std::floor(static_cast<double>(spec.n_row) / spec.accel + 1e-9));
  const std::int64_t n_acs = std::llround(spec.acs_frac * static_cast<double>(spec.n_row));
  if (n_acs > budget) {
    throw std::invalid_argument("make_vd_mask: ACS rows (" + std::to_string(n_acs) +
                                ") exceed the row budget (" + std::to_string(budget) + ")");
  }
  const std::int64_t centre = spec.n_row / 2;
  const std::int64_t acs_first = centre - n_acs / 2;

  std::vector<std::int64_t> pool;
  std::vector<double> weight;
  for (std::int64_t r = 0; r < spec.n_row; ++r) {
    if (r >= acs_first && r < acs_first + n_acs) continue;
    const double k = std::abs(static_cast<double>(r - centre)) / static_cast<double>(spec.n_row);
    pool.push_back(r);
    weight.push_back(std::pow(std::max(1.0 - k / 0.5, 0.0), spec.density_power) + 1e-12);
  }

  SamplingMask m;
  m.n_time = spec.n_time;
  m.n_row = spec.n_row;
  m.n_col = spec.n_col;
  m.m.assign(static_cast<std::size_t>(spec.n_time * spec.n_row * spec.n_col), 0);
  m.acs_first = n_acs > 0 ? acs_first : -1;
  m.acs_count = n_acs;

  Rng rng(spec.seed);
  std::vector<std::int64_t> shared;
  for (std::int64_t t = 0; t < spec.n_time; ++t) {
    std::vector<std::int64_t> rows;
    if (!spec.per_frame && t > 0) {
      rows = shared;
    } else {
      rows = draw_rows(rng, pool, weight, budget - n_acs);
      for (std::int64_t r = acs_first; r < acs_first + n_acs; ++r) rows.push_back(r);
      if (!spec.per_frame) shared = rows;
    }
    for (std::int64_t r : rows) {
      for (std::int64_t k = 0; k < spec.n_col; ++k) m.at(t, r, k) = 1;
    }
  }
  return m;
}

std::vector<double> golden_angle_angles(std::int64_t n_spokes) {
  if (n_spokes < 1) throw std::invalid_argument("golden_angle_angles: n_spokes must be >= 1");
  std::vector<double> a(static_cast<std::size_t>(n_spokes));
  for (std::int64_t i = 0; i < n_spokes; ++i) {
    a[static_cast<std::size_t>(i)] = std::fmod(static_cast<double>(i) * kGoldenAngle, M_PI);
  }
  return a;
}

RadialTrajectory golden_angle_trajectory(std::int64_t n_spokes, std::int64_t n_readout, double kmax) {
  RadialTrajectory t;
  t.n_spokes = n_spokes;
  t.n_readout = n_readout;
  t.angles = golden_angle_angles(n_spokes);
  t.kmax = kmax;
  return t;
}

RadialAcquisition acquire_radial(const FrameGenerator &frames, const RadialTrajectory &traj,
                                 const CoilSensitivities &sens, double noise_sd,
                                 std::uint64_t seed, double spoke_interval_s) {
  RadialAcquisition acq;
  acq.traj = traj;
  acq.n_coil = sens.n_coil;
  acq.samples.assign(static_cast<std::size_t>(sens.n_coil * traj.n_spokes * traj.n_readout), Cplx{});
  acq.timestamps.resize(static_cast<std::size_t>(traj.n_spokes));
  for (std::int64_t i = 0; i < traj.n_spokes; ++i) {
    acq.timestamps[static_cast<std::size_t>(i)] = static_cast<double>(i) * spoke_interval_s;
  }

  parallel_for(traj.n_spokes, [&](std::int64_t i) {
    ComplexTensor4 img = frames(acq.timestamps[static_cast<std::size_t>(i)]);
    if (img.dims().row != sens.n_row || img.dims().col != sens.n_col ||
        img.dims().coil != 1 || img.dims().time != 1) {
      throw std::invalid_argument("acquire_radial: generator frame dims mismatch");
    }
    const double cr = static_cast<double>(img.dims().row / 2);
    const double cc = static_cast<double>(img.dims().col / 2);
    const double cth = std::cos(traj.angles[static_cast<std::size_t>(i)]);
    const double sth = std::sin(traj.angles[static_cast<std::size_t>(i)]);
    for (std::int64_t r = 0; r < traj.n_readout; ++r) {
      const double rho = traj.readout_k(r);
      const double kx = rho * cth, ky = rho * sth; // angle 0 points along kx (columns)
      for (std::int64_t c = 0; c < sens.n_coil; ++c) {
        Cplx acc{};
        for (std::int64_t p = 0; p < img.dims().row; ++p) {
          for (std::int64_t q = 0; q < img.dims().col; ++q) {
            const Cplx v = sens.at(c, p, q) * img(0, 0, p, q);
            if (v == Cplx{}) continue;
            const double ph = -2.0 * M_PI * (ky * (p - cr) + kx * (q - cc));
            acc += v * Cplx(std::cos(ph), std::sin(ph));
          }
        }
        acq.at(c, i, r) = acc;
      }
    }
  });

  if (noise_sd > 0.0) {
    Rng rng(seed);
    for (auto &v : acq.samples) v += noise_sd * rng.cgauss();
  }
  return acq;
}

MotionSignal estimate_motion_signal(const RadialAcquisition &acq, std::int64_t smooth_len) {
  if (smooth_len < 1 || smooth_len % 2 == 0) {
    throw std::invalid_argument("estimate_motion_signal: smooth_len must be odd and >= 1");
  }
  if (smooth_len > acq.traj.n_spokes) {
    throw std::invalid_argument("estimate_motion_signal: smooth_len exceeds spoke count");
  }
  const std::int64_t n = acq.traj.n_spokes;
  const std::int64_t centre = acq.traj.n_readout / 2;
  std::vector<double> raw(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::int64_t c = 0; c < acq.n_coil; ++c) ss += std::norm(acq.at(c, i, centre));
    raw[static_cast<std::size_t>(i)] = std::sqrt(ss);
  }
  MotionSignal sig;
  sig.smooth_len = smooth_len;
  sig.values.resize(static_cast<std::size_t>(n));
  const std::int64_t half = smooth_len / 2;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t lo = std::max<std::int64_t>(0, i - half);
    const std::int64_t hi = std::min(n - 1, i + half);
    double acc = 0.0;
    for (std::int64_t j = lo; j <= hi; ++j) acc += raw[static_cast<std::size_t>(j)];
    sig.values[static_cast<std::size_t>(i)] = acc / static_cast<double>(hi - lo + 1);
  }
  return sig;
}

namespace {

// Spokes nearest the amplitude centre, earlier spoke first on ties.
std::vector<std::int64_t> nearest_spokes(const std::vector<double> &values,
                                         const std::vector<std::int64_t> &candidates,
                                         double centre, std::int64_t count) {
  std::vector<std::int64_t> order = candidates;
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    const double da = std::abs(values[static_cast<std::size_t>(a)] - centre);
    const double db = std::abs(values[static_cast<std::size_t>(b)] - centre);
    if (da != db) return da < db;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(count));
  std::sort(order.begin(), order.end());
  return order;
}

} // namespace

BinPlan bin_spokes(const MotionSignal &signal, std::int64_t n_states, std::int64_t window_size,
                   BinMode mode) {
  const std::int64_t n = static_cast<std::int64_t>(signal.values.size());
  if (n == 0) throw std::invalid_argument("bin_spokes: empty signal");
  if (n_states < 1) throw std::invalid_argument("bin_spokes: n_states must be >= 1");
  if (window_size < 1 || window_size > n) {
    throw std::invalid_argument("bin_spokes: window_size must be in [1, n_spokes]");
  }

  BinPlan plan;
  plan.window_size = window_size;
  plan.n_states = n_states;
  const auto &v = signal.values;

  if (mode == BinMode::Fixed) {
    // Equal-count quantile bands over the sorted amplitudes.
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
      if (v[static_cast<std::size_t>(a)] != v[static_cast<std::size_t>(b)])
        return v[static_cast<std::size_t>(a)] < v[static_cast<std::size_t>(b)];
      return a < b;
    });
    for (std::int64_t j = 0; j < n_states; ++j) {
      const std::int64_t lo = j * n / n_states;
      const std::int64_t hi = (j + 1) * n / n_states;
      if (hi - lo < window_size) {
        throw std::invalid_argument("bin_spokes: quantile band " + std::to_string(j) +
                                    " holds only " + std::to_string(hi - lo) + " spokes");
      }
      std::vector<std::int64_t> band(order.begin() + lo, order.begin() + hi);
      const double centre = 0.5 * (v[static_cast<std::size_t>(band.front())] +
                                   v[static_cast<std::size_t>(band.back())]);
      BinPlan::Bin bin;
      bin.spokes = nearest_spokes(v, band, centre, window_size);
      bin.anchor = nearest_spokes(v, band, centre, 1)[0];
      plan.bins.push_back(std::move(bin));
    }
  } else {
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn, range = *mx - *mn;
    std::vector<std::int64_t> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    for (std::int64_t j = 0; j < n_states; ++j) {
      const double centre =
          lo + range * (static_cast<double>(j) + 0.5) / static_cast<double>(n_states);
      BinPlan::Bin bin;
      bin.spokes = nearest_spokes(v, all, centre, window_size);
      bin.anchor = nearest_spokes(v, all, centre, 1)[0];
      plan.bins.push_back(std::move(bin));
    }
  }
  return plan;
}

RadialAcquisition sort_bin_to_kspace(const RadialAcquisition &acq,
                                     const std::vector<std::int64_t> &bin) {
  if (bin.empty()) throw std::invalid_argument("sort_bin_to_kspace: empty spoke list");
  for (std::int64_t idx : bin) {
    if (idx < 0 || idx >= acq.traj.n_spokes) {
      throw std::out_of_range("sort_bin_to_kspace: spoke index " + std::to_string(idx) +
                              " out of range");
    }
  }
  RadialAcquisition sub;
  sub.traj.n_spokes = static_cast<std::int64_t>(bin.size());
  sub.traj.n_readout = acq.traj.n_readout;
  sub.traj.kmax = acq.traj.kmax;
  sub.n_coil = acq.n_coil;
  sub.traj.angles.reserve(bin.size());
  sub.timestamps.reserve(bin.size());
  sub.samples.resize(static_cast<std::size_t>(sub.n_coil) * bin.size() *
                     static_cast<std::size_t>(acq.traj.n_readout));
  for (std::int64_t idx : bin) {
    sub.traj.angles.push_back(acq.traj.angles[static_cast<std::size_t>(idx)]);
    sub.timestamps.push_back(acq.timestamps[static_cast<std::size_t>(idx)]);
  }
  for (std::int64_t c = 0; c < acq.n_coil; ++c) {
    for (std::size_t s = 0; s < bin.size(); ++s) {
      for (std::int64_t r = 0; r < acq.traj.n_readout; ++r) {
        sub.at(c, static_cast<std::int64_t>(s), r) = acq.at(c, bin[s], r);
      }
    }
  }
  return sub;
}

void save_trajectory_csv(const RadialTrajectory &traj, const std::vector<double> &timestamps,
                         const std::string &path) {
  std::ofstream os(path);
  if (!os) throw TensorIoError("cannot open for write: " + path);
  os << "index,angle_rad,timestamp_s\n";
  char line[96];
  for (std::int64_t i = 0; i < traj.n_spokes; ++i) {
    std::snprintf(line, sizeof line, "%ld,%.17g,%.17g\n", i,
                  traj.angles[static_cast<std::size_t>(i)],
                  i < static_cast<std::int64_t>(timestamps.size())
                      ? timestamps[static_cast<std::size_t>(i)]
                      : 0.0);
    os << line;
  }
}

void save_binplan(const BinPlan &plan, const std::string &path) {
  std::ofstream os(path);
  if (!os) throw TensorIoError("cannot open for write: " + path);
  for (const auto &bin : plan.bins) {
    os << bin.anchor << ":";
    for (std::size_t i = 0; i < bin.spokes.size(); ++i) {
      os << (i == 0 ? " " : ",") << bin.spokes[i];
    }
    os << "\n";
  }
}

BinPlan load_binplan(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw FileMissingError("missing bin plan: " + path);
  BinPlan plan;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) throw HeaderParseError("bad bin line '" + line + "'");
    BinPlan::Bin bin;
    bin.anchor = std::stoll(line.substr(0, colon));
    std::stringstream ss(line.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) bin.spokes.push_back(std::stoll(tok));
    }
    plan.bins.push_back(std::move(bin));
  }
  if (!plan.bins.empty()) {
    plan.window_size = static_cast<std::int64_t>(plan.bins.front().spokes.size());
    plan.n_states = static_cast<std::int64_t>(plan.bins.size());
  }
  return plan;
}

void save_radial(const RadialAcquisition &acq, const std::string &path) {
  ComplexTensor4 t({acq.n_coil, 1, acq.traj.n_spokes, acq.traj.n_readout});
  std::copy(acq.samples.begin(), acq.samples.end(), t.samples().begin());
  std::map<std::string, std::string> meta;
  meta["kind"] = "radial-acquisition";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", acq.traj.kmax);
  meta["kmax"] = buf;
  save_cplx(t, path, meta);
  save_trajectory_csv(acq.traj, acq.timestamps, path + ".traj.csv");
}

RadialAcquisition load_radial(const std::string &path) {
  TensorHeader h;
  ComplexTensor4 t = load_cplx(path, &h);
  RadialAcquisition acq;
  acq.n_coil = t.dims().coil;
  acq.traj.n_spokes = t.dims().row;
  acq.traj.n_readout = t.dims().col;
  acq.traj.kmax = 0.5;
  if (auto it = h.meta.find("kmax"); it != h.meta.end()) acq.traj.kmax = std::stod(it->second);
  acq.samples.assign(t.samples().begin(), t.samples().end());

  std::ifstream is(path + ".traj.csv");
  if (!is) throw FileMissingError("missing trajectory: " + path + ".traj.csv");
  std::string line;
  std::getline(is, line); // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::int64_t idx;
    double ang, ts;
    if (std::sscanf(line.c_str(), "%ld,%lf,%lf", &idx, &ang, &ts) != 3) {
      throw HeaderParseError("bad trajectory line '" + line + "'");
    }
    acq.traj.angles.push_back(ang);
    acq.timestamps.push_back(ts);
  }
  if (static_cast<std::int64_t>(acq.traj.angles.size()) != acq.traj.n_spokes) {
    throw PayloadSizeError("trajectory row count does not match sample dims in " + path);
  }
  return acq;
}

} // namespace dynrec
