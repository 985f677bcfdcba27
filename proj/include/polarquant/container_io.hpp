#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "polarquant/gauss_quant.hpp"
#include "polarquant/polar_codec.hpp"
#include "polarquant/tensor.hpp"

namespace polarquant {

/// Malformed or unsupported container contents. The message names the byte
/// offset and, where known, the tensor.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : std::runtime_error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// .rtz: raw tensor container
//
//   "RTZ1" | u16 version (1) | u32 tensor count
//   per tensor: u16 name length | name bytes | u8 dtype | u8 rank | u64 dims[rank] | data
//
// dtype 0 is 32-bit float, 1 is binary16. All integers little-endian.

enum class RtzDType : std::uint8_t { f32 = 0, f16 = 1 };

struct RtzEntry {
  DenseTensor tensor;
  RtzDType dtype = RtzDType::f32;

  friend bool operator==(const RtzEntry&, const RtzEntry&) = default;
};

std::vector<std::uint8_t> encode_rtz(std::span<const RtzEntry> entries);
std::vector<RtzEntry> decode_rtz(std::span<const std::uint8_t> bytes);

void write_rtz(const std::filesystem::path& path, std::span<const RtzEntry> entries);
void write_rtz(const std::filesystem::path& path, std::span<const DenseTensor> tensors);
std::vector<RtzEntry> read_rtz(const std::filesystem::path& path);
/// read_rtz with binary16 tensors widened to float.
std::vector<DenseTensor> read_rtz_tensors(const std::filesystem::path& path);

// .pqz: PolarQuant container
//
//   "PQZ1" | u16 version (1) | u32 block size
//   u8 table count, per table: u8 bits | 2^bits f32 centroids
//   u32 tensor count, per tensor:
//     u16 name length | name | u8 rank | u64 dims[rank] | u64 original_len
//     u8 bits | u64 num_blocks | u8 flags (bit 0: channel scales)
//     codes: num_blocks * block size bytes | norms: num_blocks binary16
//     channel scales: dims[1] f32 (if flagged)
//
// bits == 0 marks a full-precision tensor: num_blocks is 0, flags 0, and the
// payload is original_len binary16 values.

struct PqzModel {
  std::size_t block_size = kDefaultBlockSize;
  std::vector<CentroidTable> tables;
  std::vector<QuantizedTensor> tensors;

  /// Table for a bit width; throws std::out_of_range if absent.
  const CentroidTable& table_for(int bits) const;
  /// Checks the same invariants the reader enforces.
  void validate() const;

  friend bool operator==(const PqzModel&, const PqzModel&) = default;
};

/// Unit-normal Lloyd-Max table with centroids rounded to 32-bit floats, as
/// stored in .pqz files. Boundaries and MSE are recomputed from the rounded
/// centroids so that a table read back from disk compares equal.
CentroidTable stored_table(int bits);

/// Assembles a model holding exactly the stored tables its tensors reference.
PqzModel make_pqz_model(std::vector<QuantizedTensor> tensors, std::size_t block_size);

std::vector<std::uint8_t> encode_pqz(const PqzModel& model);
PqzModel decode_pqz(std::span<const std::uint8_t> bytes);

void write_pqz(const std::filesystem::path& path, const PqzModel& model);
PqzModel read_pqz(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace polarquant
