#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "tubal/talg.hpp"

namespace tubal::io {

/// TBL3 container: "TBL3", u32 version (=1), u32 n1, u32 n2, u32 k, then the
/// payload. Tensors carry n1*n2*k float64 values, masks n1*n2*k uint8 flags,
/// both in Tensor3 storage order. All integers and floats are little-endian.
inline constexpr char kTensorMagic[4] = {'T', 'B', 'L', '3'};
inline constexpr std::uint32_t kTensorVersion = 1;

struct Shape {
  std::uint32_t n1 = 0;
  std::uint32_t n2 = 0;
  std::uint32_t k = 0;
};

void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);

void write_tensor(std::ostream& os, const Tensor3& t);
Tensor3 read_tensor(std::istream& is);
void save_tensor(const std::filesystem::path& path, const Tensor3& t);
Tensor3 load_tensor(const std::filesystem::path& path);

/// Boolean tensor stored with the TBL3 header and a uint8 payload.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> bits;

  std::size_t count() const noexcept;
};

void write_mask(std::ostream& os, const Mask& m);
Mask read_mask(std::istream& is);
void save_mask(const std::filesystem::path& path, const Mask& m);
Mask load_mask(const std::filesystem::path& path);

/// float64 array behind a u64 length prefix (noise and observation vectors).
void write_vector(std::ostream& os, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(std::istream& is);
void save_vector(const std::filesystem::path& path, const Eigen::VectorXd& v);
Eigen::VectorXd load_vector(const std::filesystem::path& path);

/// CRC-32 of a file's bytes, as 8 lowercase hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace tubal::io
