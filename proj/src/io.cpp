#include "bmtc/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "bmtc/rng.hpp"

namespace fs = std::filesystem;

namespace bmtc {
namespace {

constexpr unsigned char kTensorMagic[8] = {'B', 'M', 'T', '3', 0, 0, 0, 1};
constexpr unsigned char kMaskMagic[8] = {'B', 'M', 'M', '3', 0, 0, 0, 1};

void store_u64le(unsigned char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint64_t load_u64le(const unsigned char* in) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | in[i];
  return v;
}

// n1*n2*n3 with overflow guard, bounded so that header + payload size still
// fits in 64 bits.
std::uint64_t checked_count(std::uint64_t n1, std::uint64_t n2,
                            std::uint64_t n3, const std::string& path) {
  constexpr std::uint64_t cap =
      (std::numeric_limits<std::uint64_t>::max() - 32) / sizeof(double);
  std::uint64_t c = n1;
  if (n2 != 0 && c > cap / n2)
    throw std::runtime_error("tensor file dims overflow in " + path);
  c *= n2;
  if (n3 != 0 && c > cap / n3)
    throw std::runtime_error("tensor file dims overflow in " + path);
  c *= n3;
  return c;
}

std::uint64_t stream_size(std::istream& in) {
  in.seekg(0, std::ios::end);
  const std::streamoff n = in.tellg();
  in.seekg(0, std::ios::beg);
  return n < 0 ? 0 : static_cast<std::uint64_t>(n);
}

void write_payload_f64le(std::ostream& os, const double* p, std::size_t n) {
  constexpr std::size_t chunk = 1 << 15;
  std::vector<unsigned char> buf(std::min(n, chunk) * 8);
  while (n > 0) {
    const std::size_t take = std::min(n, chunk);
    for (std::size_t i = 0; i < take; ++i)
      store_u64le(buf.data() + 8 * i, std::bit_cast<std::uint64_t>(p[i]));
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(take * 8));
    p += take;
    n -= take;
  }
}

void read_payload_f64le(std::istream& is, double* p, std::size_t n,
                        const std::string& path) {
  constexpr std::size_t chunk = 1 << 15;
  std::vector<unsigned char> buf(std::min(n, chunk) * 8);
  while (n > 0) {
    const std::size_t take = std::min(n, chunk);
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(take * 8));
    if (static_cast<std::size_t>(is.gcount()) != take * 8)
      throw std::runtime_error("truncated tensor payload in " + path);
    for (std::size_t i = 0; i < take; ++i)
      p[i] = std::bit_cast<double>(load_u64le(buf.data() + 8 * i));
    p += take;
    n -= take;
  }
}

void write_header(std::ostream& os, const unsigned char* magic, Dims d) {
  unsigned char header[32];
  std::memcpy(header, magic, 8);
  store_u64le(header + 8, d.n1);
  store_u64le(header + 16, d.n2);
  store_u64le(header + 24, d.n3);
  os.write(reinterpret_cast<const char*>(header), 32);
}

Dims read_header(std::istream& is, const unsigned char* magic,
                 const char* what, const std::string& path) {
  unsigned char header[32];
  is.read(reinterpret_cast<char*>(header), 32);
  if (is.gcount() != 32)
    throw std::runtime_error(std::string("truncated ") + what + " header in " +
                             path);
  if (std::memcmp(header, magic, 8) != 0)
    throw std::runtime_error(std::string("bad ") + what + " magic in " + path);
  return Dims{static_cast<std::size_t>(load_u64le(header + 8)),
              static_cast<std::size_t>(load_u64le(header + 16)),
              static_cast<std::size_t>(load_u64le(header + 24))};
}

}  // namespace

void write_tensor(const std::string& path, const Tensor3& x) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_tensor: cannot open " + path);
  write_header(out, kTensorMagic, x.dims());
  write_payload_f64le(out, x.data(), x.size());
  out.flush();
  if (!out) throw std::runtime_error("write_tensor: write failed for " + path);
}

Tensor3 read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_tensor: cannot open " + path);
  const std::uint64_t total = stream_size(in);
  const Dims d = read_header(in, kTensorMagic, "tensor", path);
  const std::uint64_t count = checked_count(d.n1, d.n2, d.n3, path);
  if (total != 32 + count * sizeof(double))
    throw std::runtime_error(
        count * sizeof(double) + 32 > total
            ? "truncated tensor payload in " + path
            : "trailing data after tensor payload in " + path);
  Tensor3 x(d);
  read_payload_f64le(in, x.data(), x.size(), path);
  return x;
}

void write_mask(const std::string& path, Dims dims,
                std::span<const std::uint8_t> flags) {
  if (flags.size() != dims.count())
    throw std::invalid_argument("write_mask: flag length does not match dims");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_mask: cannot open " + path);
  write_header(out, kMaskMagic, dims);
  out.write(reinterpret_cast<const char*>(flags.data()),
            static_cast<std::streamsize>(flags.size()));
  out.flush();
  if (!out) throw std::runtime_error("write_mask: write failed for " + path);
}

MaskData read_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_mask: cannot open " + path);
  const std::uint64_t total = stream_size(in);
  const Dims d = read_header(in, kMaskMagic, "mask", path);
  const std::uint64_t count = checked_count(d.n1, d.n2, d.n3, path);
  if (count > std::numeric_limits<std::uint64_t>::max() - 32 ||
      total != 32 + count)
    throw std::runtime_error("mask payload size mismatch in " + path);
  MaskData m{d, std::vector<std::uint8_t>(count)};
  in.read(reinterpret_cast<char*>(m.flags.data()),
          static_cast<std::streamsize>(count));
  if (static_cast<std::uint64_t>(in.gcount()) != count)
    throw std::runtime_error("truncated mask payload in " + path);
  for (std::uint8_t f : m.flags) {
    if (f > 1)
      throw std::runtime_error("mask flag bytes must be 0 or 1 in " + path);
  }
  return m;
}

namespace {

struct Pgm {
  std::size_t rows = 0, cols = 0;
  int maxval = 0;
  std::vector<std::uint16_t> px;
};

long pgm_header_int(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c))
    throw std::runtime_error("malformed graymap header in " + path);
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > (1L << 30))
      throw std::runtime_error("graymap header value out of range in " + path);
    c = in.get();
  }
  if (c != EOF) in.unget();
  return v;
}

Pgm read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("import_frames: cannot open " + path);
  if (in.get() != 'P' || in.get() != '5')
    throw std::runtime_error("not a binary graymap (P5): " + path);
  const long w = pgm_header_int(in, path);
  const long h = pgm_header_int(in, path);
  const long maxval = pgm_header_int(in, path);
  if (w < 1 || h < 1)
    throw std::runtime_error("graymap geometry out of range in " + path);
  if (maxval < 1 || maxval > 65535)
    throw std::runtime_error("graymap maxval out of range in " + path);
  const int sep = in.get();
  if (sep == EOF || !std::isspace(sep))
    throw std::runtime_error("malformed graymap header in " + path);

  Pgm f;
  f.rows = static_cast<std::size_t>(h);
  f.cols = static_cast<std::size_t>(w);
  f.maxval = static_cast<int>(maxval);
  const std::size_t n = f.rows * f.cols;
  const std::size_t bytes = maxval > 255 ? 2 * n : n;
  std::vector<unsigned char> raw(bytes);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw std::runtime_error("truncated graymap data in " + path);
  f.px.resize(n);
  if (maxval > 255) {
    // 16-bit samples are big-endian.
    for (std::size_t i = 0; i < n; ++i)
      f.px[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  } else {
    for (std::size_t i = 0; i < n; ++i) f.px[i] = raw[i];
  }
  for (std::uint16_t v : f.px) {
    if (v > maxval)
      throw std::runtime_error("graymap sample exceeds maxval in " + path);
  }
  return f;
}

}  // namespace

Tensor3 import_frames(const std::string& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path());
  }
  if (ec)
    throw std::runtime_error("import_frames: cannot read directory " + dir);
  if (files.empty())
    throw std::runtime_error("import_frames: no .pgm frames in " + dir);
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });

  Tensor3 x;
  for (std::size_t k = 0; k < files.size(); ++k) {
    const Pgm f = read_pgm(files[k].string());
    if (k == 0) {
      x = Tensor3(f.rows, f.cols, files.size());
    } else if (f.rows != x.n1() || f.cols != x.n2()) {
      throw std::runtime_error("import_frames: mixed frame dimensions in " +
                               dir);
    }
    // divide per sample: k/maxval must land on the exact lattice double so
    // export followed by import is lossless there
    const double maxval = f.maxval;
    for (std::size_t i = 0; i < f.rows; ++i)
      for (std::size_t j = 0; j < f.cols; ++j)
        x(i, j, k) = f.px[i * f.cols + j] / maxval;
  }
  return x;
}

void export_frames(const Tensor3& x, const std::string& dir, int maxval) {
  if (maxval != 255 && maxval != 65535)
    throw std::invalid_argument("export_frames: maxval must be 255 or 65535");
  if (x.size() == 0)
    throw std::invalid_argument("export_frames: empty tensor");
  fs::create_directories(dir);

  const std::size_t n = x.n1() * x.n2();
  std::vector<unsigned char> raw((maxval > 255 ? 2 : 1) * n);
  for (std::size_t k = 0; k < x.n3(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06zu.pgm", k);
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("export_frames: cannot open " + path.string());
    out << "P5\n" << x.n2() << " " << x.n1() << "\n" << maxval << "\n";
    std::size_t w = 0;
    for (std::size_t i = 0; i < x.n1(); ++i) {
      for (std::size_t j = 0; j < x.n2(); ++j) {
        const double v = x(i, j, k);
        const double c = v >= 0.0 ? (v <= 1.0 ? v : 1.0) : 0.0;  // NaN to 0
        const long q = std::lround(c * maxval);
        if (maxval > 255) {
          raw[w++] = static_cast<unsigned char>(q >> 8);
          raw[w++] = static_cast<unsigned char>(q & 0xff);
        } else {
          raw[w++] = static_cast<unsigned char>(q);
        }
      }
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(w));
    out.flush();
    if (!out)
      throw std::runtime_error("export_frames: write failed for " +
                               path.string());
  }
}

ObservationMask gen_mask(const MaskSpec& spec, const Tensor3& t) {
  if (!(spec.sample_rate >= 0.0 && spec.sample_rate <= 1.0))
    throw std::invalid_argument("gen_mask: sample_rate must lie in [0,1]");
  if (!(spec.dims == t.dims()))
    throw std::invalid_argument("gen_mask: dims do not match the tensor");

  const std::size_t n = t.size();
  const auto k = static_cast<std::size_t>(
      std::llround(spec.sample_rate * static_cast<double>(n)));

  // Partial Fisher-Yates: after k steps the first k slots hold a uniform
  // sample without replacement.
  std::vector<std::uint64_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::uint64_t{0});
  Rng rng(spec.seed);
  for (std::size_t s = 0; s < k; ++s) {
    const std::uint64_t r = s + rng.uniform_index(n - s);
    std::swap(idx[s], idx[r]);
  }

  std::vector<std::uint8_t> flags(n, 0);
  for (std::size_t s = 0; s < k; ++s) flags[idx[s]] = 1;
  return ObservationMask::from_tensor(t, std::move(flags));
}

SyntheticInstance gen_synthetic(Dims dims, std::size_t ell,
                                std::size_t slice_rank, std::uint64_t seed) {
  if (dims.count() == 0)
    throw std::invalid_argument("gen_synthetic: dims must be nonzero");
  if (ell == 0)
    throw std::invalid_argument("gen_synthetic: ell must be at least 1");
  if (slice_rank == 0 || slice_rank > std::min({dims.n1, dims.n2, dims.n3}))
    throw std::invalid_argument(
        "gen_synthetic: slice_rank must lie in [1, min(n1,n2,n3)]");

  Rng rng(seed);
  std::vector<double> u(std::max(dims.n1, dims.n2)), v(dims.n3);
  const auto draw = [&rng](std::vector<double>& w, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) w[i] = rng.uniform01();
  };

  // Lateral slices of a1: sums of slice_rank rank-one outer products.
  Tensor3 a1(dims.n1, ell, dims.n3);
  for (std::size_t t = 0; t < ell; ++t) {
    for (std::size_t q = 0; q < slice_rank; ++q) {
      draw(u, dims.n1);
      draw(v, dims.n3);
      for (std::size_t i = 0; i < dims.n1; ++i)
        for (std::size_t kk = 0; kk < dims.n3; ++kk)
          a1(i, t, kk) += u[i] * v[kk];
    }
  }

  Tensor3 a2(dims.n1, dims.n2, ell);
  for (std::size_t i = 0; i < a2.size(); ++i) a2.data()[i] = rng.uniform01();

  // Horizontal slices of a3, same construction as a1.
  Tensor3 a3(ell, dims.n2, dims.n3);
  for (std::size_t t = 0; t < ell; ++t) {
    for (std::size_t q = 0; q < slice_rank; ++q) {
      draw(u, dims.n2);
      draw(v, dims.n3);
      for (std::size_t j = 0; j < dims.n2; ++j)
        for (std::size_t kk = 0; kk < dims.n3; ++kk)
          a3(t, j, kk) += u[j] * v[kk];
    }
  }

  BmFactors f(std::move(a1), std::move(a2), std::move(a3));
  Tensor3 x = bmp(f);
  return SyntheticInstance{std::move(x), std::move(f)};
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("hash_file: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

}  // namespace bmtc
