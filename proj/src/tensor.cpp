#include "tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dynrec {

namespace fs = std::filesystem;

std::string Dims4::str() const {
  std::ostringstream os;
  os << coil << "," << time << "," << row << "," << col;
  return os.str();
}

bool ComplexTensor4::all_finite() const {
  for (const auto &v : data_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

Cplx dot(const ComplexTensor4 &a, const ComplexTensor4 &b) {
  require_same_dims(a, b, "dot");
  Cplx acc{0.0, 0.0};
  auto sa = a.samples(), sb = b.samples();
  for (std::size_t i = 0; i < sa.size(); ++i) acc += std::conj(sa[i]) * sb[i];
  return acc;
}

double norm2(const ComplexTensor4 &a) {
  double acc = 0.0;
  for (const auto &v : a.samples()) acc += std::norm(v);
  return std::sqrt(acc);
}

double nmse(const ComplexTensor4 &x, const ComplexTensor4 &ref) {
  require_same_dims(x, ref, "nmse");
  double num = 0.0, den = 0.0;
  auto sx = x.samples(), sr = ref.samples();
  for (std::size_t i = 0; i < sx.size(); ++i) {
    num += std::norm(sx[i] - sr[i]);
    den += std::norm(sr[i]);
  }
  if (den == 0.0) throw std::invalid_argument("nmse: reference is identically zero");
  return num / den;
}

void require_same_dims(const ComplexTensor4 &a, const ComplexTensor4 &b, const char *where) {
  if (!(a.dims() == b.dims())) {
    throw std::invalid_argument(std::string(where) + ": dim mismatch " + a.dims().str() +
                                " vs " + b.dims().str());
  }
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "on-disk format is little-endian; byte swapping not implemented");

void write_file_atomic(const std::string &final_path, const std::string &bytes) {
  const std::string tmp = final_path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw TensorIoError("cannot open for write: " + tmp);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw TensorIoError("write failed: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, final_path, ec);
  if (ec) throw TensorIoError("rename failed: " + tmp + " -> " + final_path + ": " + ec.message());
}

Dims4 parse_dims(const std::string &s, const std::string &path) {
  Dims4 d;
  if (std::sscanf(s.c_str(), "%ld,%ld,%ld,%ld", &d.coil, &d.time, &d.row, &d.col) != 4 ||
      d.coil <= 0 || d.time <= 0 || d.row <= 0 || d.col <= 0) {
    throw HeaderParseError("bad dims '" + s + "' in " + path);
  }
  return d;
}

std::string trim(const std::string &s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

} // namespace

void save_cplx(const ComplexTensor4 &t, const std::string &path,
               const std::map<std::string, std::string> &meta) {
  std::ostringstream hdr;
  hdr << "dims: " << t.dims().str() << "\n";
  hdr << "dtype: complex-float32\n";
  hdr << "order: coil,time,row,col\n";
  for (const auto &[k, v] : meta) {
    if (k == "dims" || k == "dtype" || k == "order") continue;
    hdr << k << ": " << v << "\n";
  }

  std::string payload(static_cast<std::size_t>(t.size()) * 8, '\0');
  auto s = t.samples();
  for (std::int64_t i = 0; i < t.size(); ++i) {
    const float re = static_cast<float>(s[i].real());
    const float im = static_cast<float>(s[i].imag());
    std::memcpy(payload.data() + i * 8, &re, 4);
    std::memcpy(payload.data() + i * 8 + 4, &im, 4);
  }

  write_file_atomic(path + ".cplx", payload);
  write_file_atomic(path + ".hdr", hdr.str());
}

TensorHeader load_header(const std::string &path) {
  const std::string hdr_path = path + ".hdr";
  std::ifstream is(hdr_path);
  if (!is) throw FileMissingError("missing header: " + hdr_path);
  TensorHeader h;
  bool have_dims = false;
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) throw HeaderParseError("malformed line '" + line + "' in " + hdr_path);
    const std::string key = trim(line.substr(0, colon));
    const std::string val = trim(line.substr(colon + 1));
    if (key == "dims") {
      h.dims = parse_dims(val, hdr_path);
      have_dims = true;
    } else if (key == "dtype") {
      if (val != "complex-float32") throw HeaderParseError("unsupported dtype '" + val + "' in " + hdr_path);
      h.dtype = val;
    } else if (key == "order") {
      if (val != "coil,time,row,col") throw HeaderParseError("unsupported order '" + val + "' in " + hdr_path);
      h.order = val;
    } else {
      h.meta[key] = val;
    }
  }
  if (!have_dims) throw HeaderParseError("no dims key in " + hdr_path);
  return h;
}

ComplexTensor4 load_cplx(const std::string &path, TensorHeader *header_out) {
  TensorHeader h = load_header(path);
  const std::string bin_path = path + ".cplx";
  std::ifstream is(bin_path, std::ios::binary);
  if (!is) throw FileMissingError("missing payload: " + bin_path);
  is.seekg(0, std::ios::end);
  const std::int64_t bytes = is.tellg();
  is.seekg(0, std::ios::beg);
  const std::int64_t expected = h.dims.count() * 8;
  if (bytes != expected) {
    throw PayloadSizeError("payload " + bin_path + " is " + std::to_string(bytes) +
                           " bytes, header dims " + h.dims.str() + " require " +
                           std::to_string(expected));
  }
  std::vector<char> raw(static_cast<std::size_t>(bytes));
  is.read(raw.data(), bytes);
  if (!is) throw TensorIoError("short read: " + bin_path);

  ComplexTensor4 t(h.dims);
  auto s = t.samples();
  for (std::int64_t i = 0; i < t.size(); ++i) {
    float re, im;
    std::memcpy(&re, raw.data() + i * 8, 4);
    std::memcpy(&im, raw.data() + i * 8 + 4, 4);
    s[i] = Cplx(re, im);
  }
  if (header_out) *header_out = std::move(h);
  return t;
}

} // namespace dynrec
