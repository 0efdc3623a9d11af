#include "tubal/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>

#include <boost/crc.hpp>

#include "tubal/error.hpp"

namespace tubal::io {

namespace {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <class T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
  if (!os) raise(ErrorCode::io, "write failed");
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T)))
    raise(ErrorCode::io, "unexpected end of file");
  return to_little(v);
}

void put_doubles(std::ostream& os, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size_bytes()));
    if (!os) raise(ErrorCode::io, "write failed");
  } else {
    for (double v : values) put(os, v);
  }
}

void get_doubles(std::istream& is, std::span<double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    if (is.gcount() != static_cast<std::streamsize>(values.size_bytes()))
      raise(ErrorCode::io, "unexpected end of file");
  } else {
    for (double& v : values) v = get<double>(is);
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) raise(ErrorCode::io, "cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorCode::io, "cannot open " + path.string());
  return is;
}

void write_header(std::ostream& os, Shape s) {
  os.write(kTensorMagic, 4);
  put(os, kTensorVersion);
  put(os, s.n1);
  put(os, s.n2);
  put(os, s.k);
}

Shape read_header(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kTensorMagic, 4) != 0)
    raise(ErrorCode::io, "not a TBL3 file");
  const auto version = get<std::uint32_t>(is);
  if (version != kTensorVersion)
    raise(ErrorCode::io, "unsupported TBL3 version " + std::to_string(version));
  Shape s{get<std::uint32_t>(is), get<std::uint32_t>(is), get<std::uint32_t>(is)};
  if (s.n1 == 0 || s.n2 == 0 || s.k == 0) raise(ErrorCode::io, "TBL3 header has a zero dimension");
  return s;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { put(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { put(os, v); }
void write_f64(std::ostream& os, double v) { put(os, v); }
std::uint32_t read_u32(std::istream& is) { return get<std::uint32_t>(is); }
std::uint64_t read_u64(std::istream& is) { return get<std::uint64_t>(is); }
double read_f64(std::istream& is) { return get<double>(is); }

void write_tensor(std::ostream& os, const Tensor3& t) {
  write_header(os, Shape{static_cast<std::uint32_t>(t.n1()), static_cast<std::uint32_t>(t.n2()),
                         static_cast<std::uint32_t>(t.k())});
  put_doubles(os, t.values());
}

Tensor3 read_tensor(std::istream& is) {
  const Shape s = read_header(is);
  Tensor3 t(s.n1, s.n2, s.k);
  get_doubles(is, t.values());
  if (!t.all_finite()) raise(ErrorCode::io, "tensor file contains non-finite values");
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor3& t) {
  auto os = open_out(path);
  write_tensor(os, t);
}

Tensor3 load_tensor(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_tensor(is);
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

void write_mask(std::ostream& os, const Mask& m) {
  if (m.bits.size() != std::size_t{m.shape.n1} * m.shape.n2 * m.shape.k)
    raise(ErrorCode::dimension_mismatch, "mask payload does not match its shape");
  write_header(os, m.shape);
  os.write(reinterpret_cast<const char*>(m.bits.data()), static_cast<std::streamsize>(m.bits.size()));
  if (!os) raise(ErrorCode::io, "write failed");
}

Mask read_mask(std::istream& is) {
  Mask m;
  m.shape = read_header(is);
  m.bits.resize(std::size_t{m.shape.n1} * m.shape.n2 * m.shape.k);
  is.read(reinterpret_cast<char*>(m.bits.data()), static_cast<std::streamsize>(m.bits.size()));
  if (is.gcount() != static_cast<std::streamsize>(m.bits.size()))
    raise(ErrorCode::io, "unexpected end of mask file");
  for (auto& b : m.bits) b = b != 0;
  return m;
}

void save_mask(const std::filesystem::path& path, const Mask& m) {
  auto os = open_out(path);
  write_mask(os, m);
}

Mask load_mask(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_mask(is);
}

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  put(os, static_cast<std::uint64_t>(v.size()));
  put_doubles(os, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

Eigen::VectorXd read_vector(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (std::uint64_t{1} << 40)) raise(ErrorCode::io, "implausible vector length");
  Eigen::VectorXd v(static_cast<Index>(n));
  get_doubles(is, std::span<double>(v.data(), static_cast<std::size_t>(v.size())));
  return v;
}

void save_vector(const std::filesystem::path& path, const Eigen::VectorXd& v) {
  auto os = open_out(path);
  write_vector(os, v);
}

Eigen::VectorXd load_vector(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_vector(is);
}

std::string file_checksum(const std::filesystem::path& path) {
  auto is = open_in(path);
  boost::crc_32_type crc;
  std::array<char, 1 << 16> buf{};
  while (is) {
    is.read(buf.data(), buf.size());
    crc.process_bytes(buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << crc.checksum();
  return os.str();
}

}  // namespace tubal::io
