#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fft.hpp"
#include "oracles.hpp"
#include "tensor.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace dynrec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("dynrec_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string &name) const { return (path / name).string(); }
  static int &counter() {
    static int c = 0;
    return c;
  }
};

} // namespace

TEST_CASE("payload encodes (3,-4) as little-endian float32") {
  TempDir dir;
  ComplexTensor4 t({1, 1, 1, 1});
  t(0, 0, 0, 0) = Cplx(3.0, -4.0);
  save_cplx(t, dir.file("one"));

  std::ifstream is(dir.file("one") + ".cplx", std::ios::binary);
  REQUIRE(is.good());
  unsigned char bytes[8];
  is.read(reinterpret_cast<char *>(bytes), 8);
  REQUIRE(is.gcount() == 8);
  // 3.0f = 0x40400000, -4.0f = 0xC0800000, both little-endian.
  const unsigned char expected[8] = {0x00, 0x00, 0x40, 0x40, 0x00, 0x00, 0x80, 0xC0};
  for (int i = 0; i < 8; ++i) CHECK(bytes[i] == expected[i]);
}

TEST_CASE("save/load round-trip is bit-exact") {
  TempDir dir;
  ComplexTensor4 t = oracle::random_tensor_f32({2, 3, 5, 7}, 42);
  save_cplx(t, dir.file("rt"), {{"note", "hello world"}});
  TensorHeader h;
  ComplexTensor4 back = load_cplx(dir.file("rt"), &h);
  REQUIRE(back.dims() == t.dims());
  auto a = t.samples(), b = back.samples();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].real() == b[i].real());
    CHECK(a[i].imag() == b[i].imag());
  }
  CHECK(h.meta.at("note") == "hello world");
}

TEST_CASE("payload size matches dims arithmetic") {
  TempDir dir;
  ComplexTensor4 t({4, 8, 64, 64});
  save_cplx(t, dir.file("big"));
  CHECK(fs::file_size(dir.file("big") + ".cplx") == 4u * 8u * 64u * 64u * 8u);
}

TEST_CASE("load errors are distinct") {
  TempDir dir;
  SUBCASE("missing file") { CHECK_THROWS_AS(load_cplx(dir.file("nope")), FileMissingError); }
  SUBCASE("malformed header") {
    std::ofstream(dir.file("bad") + ".hdr") << "dims 1,1,1,1\n"; // no colon
    std::ofstream(dir.file("bad") + ".cplx", std::ios::binary) << "xxxxxxxx";
    CHECK_THROWS_AS(load_cplx(dir.file("bad")), HeaderParseError);
  }
  SUBCASE("truncated payload") {
    ComplexTensor4 t({1, 1, 2, 2});
    save_cplx(t, dir.file("trunc"));
    fs::resize_file(dir.file("trunc") + ".cplx", 16);
    CHECK_THROWS_AS(load_cplx(dir.file("trunc")), PayloadSizeError);
  }
  SUBCASE("dims 2,2,2,2 with a 256-byte payload loads") {
    ComplexTensor4 t({2, 2, 2, 2});
    save_cplx(t, dir.file("ok"));
    CHECK(fs::file_size(dir.file("ok") + ".cplx") == 128);
    // 16 samples * 8 bytes: grow the tensor instead to get 256 bytes.
    ComplexTensor4 t2({2, 2, 2, 4});
    save_cplx(t2, dir.file("ok2"));
    CHECK(fs::file_size(dir.file("ok2") + ".cplx") == 256);
    CHECK_NOTHROW(load_cplx(dir.file("ok2")));
  }
}

TEST_CASE("fft2c of a centred impulse is a flat 1/N frame") {
  const std::int64_t n = 16;
  ComplexTensor4 t({1, 1, n, n});
  t(0, 0, n / 2, n / 2) = 1.0;
  ComplexTensor4 f = fft2c(t);
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < n; ++c) {
      CHECK(std::abs(f(0, 0, r, c) - Cplx(1.0 / n, 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("fft2c of a constant frame is an impulse of height N at the centre") {
  const std::int64_t n = 8;
  ComplexTensor4 t({1, 1, n, n});
  for (auto &v : t.samples()) v = 1.0;
  ComplexTensor4 f = fft2c(t);
  CHECK(std::abs(f(0, 0, n / 2, n / 2) - Cplx(n, 0.0)) < 1e-12);
  double off = 0.0;
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < n; ++c) {
      if (r != n / 2 || c != n / 2) off = std::max(off, std::abs(f(0, 0, r, c)));
    }
  }
  CHECK(off < 1e-12);
}

TEST_CASE("fft2c matches the direct DFT oracle") {
  for (auto dims : {Dims4{1, 1, 8, 8}, Dims4{2, 2, 16, 16}, Dims4{1, 1, 7, 9}}) {
    ComplexTensor4 t = oracle::random_tensor(dims, 7 + dims.row);
    CHECK(oracle::rel_err(fft2c(t), oracle::dft2c(t, -1)) < 1e-5);
    CHECK(oracle::rel_err(ifft2c(t), oracle::dft2c(t, +1)) < 1e-5);
  }
}

TEST_CASE("fft2c/ifft2c round-trip and Parseval") {
  ComplexTensor4 t = oracle::random_tensor({4, 3, 8, 8}, 11);
  CHECK(oracle::rel_err(ifft2c(fft2c(t)), t) < 1e-6);
  CHECK(oracle::rel_err(fft2c(ifft2c(t)), t) < 1e-6);
  CHECK(std::abs(norm2(fft2c(t)) - norm2(t)) / norm2(t) < 1e-6);
}

TEST_CASE("unitarity: <fft2c(a), b> = <a, ifft2c(b)>") {
  ComplexTensor4 a = oracle::random_tensor({2, 2, 16, 16}, 3);
  ComplexTensor4 b = oracle::random_tensor({2, 2, 16, 16}, 4);
  const Cplx lhs = dot(fft2c(a), b);
  const Cplx rhs = dot(a, ifft2c(b));
  CHECK(std::abs(lhs - rhs) / (norm2(a) * norm2(b)) < 1e-6);
}

TEST_CASE("round-trip property holds for odd sizes too") {
  ComplexTensor4 t = oracle::random_tensor({1, 2, 9, 5}, 13);
  CHECK(oracle::rel_err(ifft2c(fft2c(t)), t) < 1e-6);
}
