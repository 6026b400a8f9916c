// Drives the installed binary through temp-dir pipelines. The binary path
// comes from the DYNREC_BIN environment variable (set by ctest).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "encoding.hpp"
#include "fft.hpp"
#include "sampling.hpp"
#include "tensor.hpp"

using namespace dynrec;
namespace fs = std::filesystem;

namespace {

std::string bin_path() {
  const char *env = std::getenv("DYNREC_BIN");
  REQUIRE_MESSAGE(env != nullptr, "DYNREC_BIN must point at the dynrec binary");
  return env;
}

struct Workdir {
  fs::path path;
  Workdir() {
    path = fs::temp_directory_path() / ("dynrec_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(next()++));
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string file(const std::string &name) const { return (path / name).string(); }
  static int &next() {
    static int n = 0;
    return n;
  }
};

int run(const std::string &args, const std::string &stderr_to = "") {
  std::string cmd = bin_path() + " " + args;
  if (!stderr_to.empty()) {
    cmd += " 2> " + stderr_to;
  } else {
    cmd += " 2> /dev/null";
  }
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

} // namespace

TEST_CASE("phantom generation is deterministic and refuses silent overwrite") {
  Workdir w;
  REQUIRE(run("phantom --rows 16 --cols 16 --frames 2 --seed 5 --out " + w.file("a")) == 0);
  REQUIRE(run("phantom --rows 16 --cols 16 --frames 2 --seed 5 --out " + w.file("b")) == 0);
  CHECK(slurp(w.file("a") + ".cplx") == slurp(w.file("b") + ".cplx"));
  CHECK(run("phantom --rows 16 --cols 16 --frames 2 --seed 5 --out " + w.file("a")) != 0);
  CHECK(run("phantom --rows 16 --cols 16 --frames 2 --seed 5 --force --out " + w.file("a")) == 0);
}

TEST_CASE("echoed dims match the written header") {
  Workdir w;
  REQUIRE(run("phantom --rows 12 --cols 10 --frames 3 --seed 1 --out " + w.file("p"),
              w.file("err.txt")) == 0);
  const std::string err = slurp(w.file("err.txt"));
  CHECK(err.find("1,3,12,10") != std::string::npos);
  TensorHeader h = load_header(w.file("p"));
  CHECK(h.dims.str() == "1,3,12,10");
}

TEST_CASE("CLI acquisition equals the in-process forward operator bit-exactly") {
  Workdir w;
  REQUIRE(run("phantom --rows 16 --cols 16 --frames 3 --seed 2 --out " + w.file("x")) == 0);
  REQUIRE(run("coilmaps --rows 16 --cols 16 --coils 3 --seed 3 --out " + w.file("s")) == 0);
  REQUIRE(run("mask --rows 16 --cols 16 --frames 3 --accel 2 --acs-frac 0.2 --seed 4 --out " +
              w.file("m")) == 0);
  REQUIRE(run("acquire cartesian --phantom " + w.file("x") + " --maps " + w.file("s") +
              " --mask " + w.file("m") + " --out " + w.file("y")) == 0);

  EncodingOperator op{load_coilmaps(w.file("s")), load_mask(w.file("m"))};
  ComplexTensor4 expect = forward(op, load_cplx(w.file("x")));
  // Round through float32 exactly as save_cplx does.
  for (auto &v : expect.samples()) {
    v = Cplx(static_cast<float>(v.real()), static_cast<float>(v.imag()));
  }
  ComplexTensor4 got = load_cplx(w.file("y"));
  auto a = got.samples(), b = expect.samples();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("zero-filled recon equals the adjoint of the encoding module") {
  Workdir w;
  REQUIRE(run("phantom --rows 16 --cols 16 --frames 2 --seed 7 --out " + w.file("x")) == 0);
  REQUIRE(run("coilmaps --rows 16 --cols 16 --coils 2 --seed 8 --out " + w.file("s")) == 0);
  REQUIRE(run("mask --rows 16 --cols 16 --frames 2 --accel 2 --acs-frac 0.2 --seed 9 --out " +
              w.file("m")) == 0);
  REQUIRE(run("acquire cartesian --phantom " + w.file("x") + " --maps " + w.file("s") +
              " --mask " + w.file("m") + " --out " + w.file("y")) == 0);
  REQUIRE(run("recon zero-filled --input " + w.file("y") + " --mask " + w.file("m") + " --maps " +
              w.file("s") + " --out " + w.file("zf")) == 0);
  EncodingOperator op{load_coilmaps(w.file("s")), load_mask(w.file("m"))};
  ComplexTensor4 expect = adjoint(op, load_cplx(w.file("y")));
  for (auto &v : expect.samples()) {
    v = Cplx(static_cast<float>(v.real()), static_cast<float>(v.imag()));
  }
  ComplexTensor4 got = load_cplx(w.file("zf"));
  for (std::int64_t i = 0; i < got.size(); ++i) CHECK(got.samples()[i] == expect.samples()[i]);
}

TEST_CASE("bin subcommand reproduces the 1700-spoke sliding-window setup") {
  Workdir w;
  REQUIRE(run("coilmaps --rows 16 --cols 16 --coils 1 --seed 1 --out " + w.file("s")) == 0);
  REQUIRE(run("acquire radial --maps " + w.file("s") +
              " --mode respiratory --amplitude 3 --period 170 --spokes 1700 --readout 32 "
              "--seed 2 --out " + w.file("acq")) == 0);
  REQUIRE(run("bin --acq " + w.file("acq") +
              " --states 6 --window 283 --bin-mode sliding --smooth 21 --out " +
              w.file("plan.txt")) == 0);
  BinPlan plan = load_binplan(w.file("plan.txt"));
  REQUIRE(plan.bins.size() == 6);
  for (const auto &bin : plan.bins) CHECK(bin.spokes.size() == 283);
}

TEST_CASE("grog on golden-angle data inside the grid reports zero dropped samples") {
  Workdir w;
  REQUIRE(run("coilmaps --rows 16 --cols 16 --coils 2 --seed 5 --out " + w.file("s")) == 0);
  REQUIRE(run("acquire radial --maps " + w.file("s") +
              " --mode cardiac --amplitude 0 --period 100 --spokes 8 --readout 32 --seed 3 "
              "--out " + w.file("acq")) == 0);
  // readout == grid and angles clear of the +kmax wrap keep every sample
  // inside the grid
  REQUIRE(run("grog --acq " + w.file("acq") + " --grid 32 --out " + w.file("g"),
              w.file("err.txt")) == 0);
  const std::string err = slurp(w.file("err.txt"));
  CHECK(err.find("dropped 0 sample(s)") != std::string::npos);
  CHECK(fs::exists(w.file("g") + ".grid.cplx"));
  CHECK(fs::exists(w.file("g") + ".mask.cplx"));
  CHECK(fs::exists(w.file("g") + ".hits.cplx"));
}

TEST_CASE("export writes the exact PGM header and constant payloads") {
  Workdir w;
  // A zero-amplitude phantom has identical frames; frame 0 is a known image.
  REQUIRE(run("phantom --rows 9 --cols 13 --frames 2 --amplitude 0 --seed 1 --out " +
              w.file("x")) == 0);
  REQUIRE(run("export --input " + w.file("x") + " --out-prefix " + w.file("img") +
              " --profile-row 4") == 0);
  const std::string f0 = slurp(w.file("img") + "_f000.pgm");
  const std::string header = "P5\n13 9\n255\n";
  REQUIRE(f0.size() == header.size() + 9 * 13);
  CHECK(f0.substr(0, header.size()) == header);
  CHECK(f0 == slurp(w.file("img") + "_f001.pgm"));

  const std::string prof = slurp(w.file("img") + "_xt_row4.pgm");
  CHECK(prof.substr(0, 10) == "P5\n13 2\n25"); // 13 wide, 2 frames tall
}

TEST_CASE("config file sections feed subcommands and unknown keys are rejected") {
  Workdir w;
  {
    std::ofstream cfg(w.file("run.cfg"));
    cfg << "[mask]\n"
        << "rows = 16\n"
        << "cols = 16\n"
        << "frames = 2\n"
        << "accel = 2\n"
        << "acs-frac = 0.25\n"
        << "seed = 11\n";
  }
  REQUIRE(run("--config " + w.file("run.cfg") + " mask --out " + w.file("m")) == 0);
  SamplingMask m = load_mask(w.file("m"));
  CHECK(m.n_row == 16);
  CHECK(m.acs_count == 4);

  // Flags override config values.
  REQUIRE(run("--config " + w.file("run.cfg") + " mask --acs-frac 0.5 --accel 1 --out " +
              w.file("m2")) == 0);
  CHECK(load_mask(w.file("m2")).acs_count == 8);

  {
    std::ofstream cfg(w.file("bad.cfg"));
    cfg << "[mask]\n"
        << "rows = 16\n"
        << "cols = 16\n"
        << "frames = 2\n"
        << "no-such-key = 1\n";
  }
  CHECK(run("--config " + w.file("bad.cfg") + " mask --out " + w.file("m3")) != 0);
}

TEST_CASE("ktfit output feeds recon diffusion") {
  Workdir w;
  REQUIRE(run("phantom --rows 16 --cols 16 --frames 4 --seed 1 --out " + w.file("x")) == 0);
  REQUIRE(run("coilmaps --rows 16 --cols 16 --coils 2 --seed 2 --out " + w.file("s")) == 0);
  REQUIRE(run("mask --rows 16 --cols 16 --frames 4 --accel 2 --acs-frac 0.25 --seed 3 --out " +
              w.file("m")) == 0);
  REQUIRE(run("acquire cartesian --phantom " + w.file("x") + " --maps " + w.file("s") +
              " --mask " + w.file("m") + " --out " + w.file("y")) == 0);
  REQUIRE(run("ktfit --input " + w.file("y") + " --mask " + w.file("m") + " --out " +
              w.file("k")) == 0);
  CHECK(fs::exists(w.file("k") + ".kernel.json"));
  REQUIRE(run("recon diffusion --input " + w.file("y") + " --mask " + w.file("m") + " --maps " +
              w.file("s") + " --steps 5 --cg-iters 2 --kt " + w.file("k") + " --seed 4 --out " +
              w.file("r")) == 0);
  CHECK(fs::exists(w.file("r") + ".cplx"));
}

TEST_CASE("diffusion recon bytes are identical across reruns and thread counts") {
  Workdir w;
  REQUIRE(run("phantom --rows 16 --cols 16 --frames 4 --seed 1 --out " + w.file("x")) == 0);
  REQUIRE(run("coilmaps --rows 16 --cols 16 --coils 2 --seed 2 --out " + w.file("s")) == 0);
  REQUIRE(run("mask --rows 16 --cols 16 --frames 4 --accel 2 --acs-frac 0.25 --seed 3 --out " +
              w.file("m")) == 0);
  REQUIRE(run("acquire cartesian --phantom " + w.file("x") + " --maps " + w.file("s") +
              " --mask " + w.file("m") + " --out " + w.file("y")) == 0);
  const std::string recon = " recon diffusion --input " + w.file("y") + " --mask " + w.file("m") +
                            " --maps " + w.file("s") +
                            " --steps 5 --cg-iters 2 --kt fit --seed 7 --out ";
  REQUIRE(run("--threads 1" + recon + w.file("r1")) == 0);
  REQUIRE(run("--threads 4" + recon + w.file("r2")) == 0);
  REQUIRE(run("--threads 4" + recon + w.file("r3")) == 0);
  CHECK(slurp(w.file("r1") + ".cplx") == slurp(w.file("r2") + ".cplx"));
  CHECK(slurp(w.file("r2") + ".cplx") == slurp(w.file("r3") + ".cplx"));
}
