#include "polarquant/container_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "polarquant/hadamard.hpp"
#include "polarquant/half.hpp"

namespace polarquant {
namespace {

constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kMaxRank = 16;
constexpr std::uint8_t kFlagChannelScales = 0x01;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { little_endian(v, 2); }
  void u32(std::uint32_t v) { little_endian(v, 4); }
  void u64(std::uint64_t v) { little_endian(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void name(const std::string& s) {
    if (s.size() > 0xffff) throw std::invalid_argument("tensor name longer than 65535 bytes");
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void little_endian(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return data_.size() - pos_; }
  void set_context(std::string tensor) { context_ = std::move(tensor); }

  [[noreturn]] void fail(const std::string& what) const { fail_at(pos_, what); }
  [[noreturn]] void fail_at(std::uint64_t at, const std::string& what) const {
    throw FormatError(at, context_.empty() ? what : "tensor '" + context_ + "': " + what);
  }

  void need(std::uint64_t n, const char* what) const {
    if (n > remaining()) {
      fail(std::string("truncated payload reading ") + what + " (need " + std::to_string(n) +
           " bytes, " + std::to_string(remaining()) + " left)");
    }
  }
  void need_elements(std::uint64_t count, std::uint64_t size, const char* what) const {
    if (count > remaining() / size) {
      fail(std::string("truncated payload reading ") + what + " (need " + std::to_string(count) +
           " x " + std::to_string(size) + " bytes, " + std::to_string(remaining()) + " left)");
    }
  }
  std::span<const std::uint8_t> bytes(std::uint64_t n, const char* what) {
    need(n, what);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return bytes(1, what)[0]; }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(little_endian(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(little_endian(4, what)); }
  std::uint64_t u64(const char* what) { return little_endian(8, what); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string name() {
    const std::uint16_t len = u16("name length");
    auto s = bytes(len, "name");
    return std::string(s.begin(), s.end());
  }
  void magic(const char (&expected)[5]) {
    auto m = bytes(4, "magic");
    if (std::memcmp(m.data(), expected, 4) != 0) {
      fail_at(0, std::string("bad magic, expected \"") + expected + "\"");
    }
  }
  void version() {
    const std::uint64_t at = pos_;
    const std::uint16_t v = u16("version");
    if (v != kVersion) fail_at(at, "unsupported version " + std::to_string(v));
  }
  void finish() const {
    if (remaining() != 0) {
      throw FormatError(pos_, std::to_string(remaining()) + " trailing bytes after last tensor");
    }
  }

 private:
  std::uint64_t little_endian(int n, const char* what) {
    auto s = bytes(static_cast<std::uint64_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::uint64_t pos_ = 0;
  std::string context_;
};

std::vector<std::uint64_t> read_shape(Reader& r) {
  const std::uint64_t at = r.offset();
  const std::uint8_t rank = r.u8("rank");
  if (rank > kMaxRank) r.fail_at(at, "rank " + std::to_string(rank) + " exceeds " + std::to_string(kMaxRank));
  std::vector<std::uint64_t> shape(rank);
  for (auto& d : shape) d = r.u64("dimension");
  return shape;
}

std::uint64_t checked_numel(Reader& r, const std::vector<std::uint64_t>& shape, std::uint64_t at) {
  try {
    return shape_numel(shape);
  } catch (const std::overflow_error&) {
    r.fail_at(at, "shape " + shape_to_string(shape) + " overflows");
  }
}

void write_shape(Writer& w, const std::vector<std::uint64_t>& shape) {
  if (shape.size() > kMaxRank) throw std::invalid_argument("tensor rank exceeds 16");
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) w.u64(d);
}

bool half_is_valid_norm(std::uint16_t h) { return !(h & 0x8000u) && (h & 0x7c00u) != 0x7c00u; }

}  // namespace

// --- .rtz ---

std::vector<std::uint8_t> encode_rtz(std::span<const RtzEntry> entries) {
  std::set<std::string> names;
  for (const auto& e : entries) {
    e.tensor.validate();
    if (!names.insert(e.tensor.name).second) {
      throw std::invalid_argument("duplicate tensor name '" + e.tensor.name + "'");
    }
  }
  Writer w;
  w.bytes("RTZ1", 4);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.name(e.tensor.name);
    w.u8(static_cast<std::uint8_t>(e.dtype));
    write_shape(w, e.tensor.shape);
    if (e.dtype == RtzDType::f32) {
      for (float v : e.tensor.data) w.f32(v);
    } else {
      for (float v : e.tensor.data) {
        if (std::abs(v) > kHalfMax) {
          throw std::invalid_argument("tensor '" + e.tensor.name + "' exceeds the binary16 range");
        }
        w.u16(float_to_half(v));
      }
    }
  }
  return w.take();
}

std::vector<RtzEntry> decode_rtz(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("RTZ1");
  r.version();
  const std::uint32_t count = r.u32("tensor count");
  std::vector<RtzEntry> entries;
  std::set<std::string> names;
  for (std::uint32_t t = 0; t < count; ++t) {
    r.set_context("");
    const std::uint64_t name_at = r.offset();
    RtzEntry e;
    e.tensor.name = r.name();
    r.set_context(e.tensor.name);
    if (!names.insert(e.tensor.name).second) r.fail_at(name_at, "duplicate tensor name");
    const std::uint64_t dtype_at = r.offset();
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype > 1) r.fail_at(dtype_at, "unknown dtype code " + std::to_string(dtype));
    e.dtype = static_cast<RtzDType>(dtype);
    const std::uint64_t shape_at = r.offset();
    e.tensor.shape = read_shape(r);
    const std::uint64_t n = checked_numel(r, e.tensor.shape, shape_at);
    const std::uint64_t elem = e.dtype == RtzDType::f32 ? 4 : 2;
    r.need_elements(n, elem, "tensor data");
    e.tensor.data.resize(n);
    for (auto& v : e.tensor.data) {
      const std::uint64_t at = r.offset();
      v = e.dtype == RtzDType::f32 ? r.f32("tensor data") : half_to_float(r.u16("tensor data"));
      if (!std::isfinite(v)) r.fail_at(at, "non-finite element");
    }
    entries.push_back(std::move(e));
  }
  r.set_context("");
  r.finish();
  return entries;
}

// --- .pqz ---

const CentroidTable& PqzModel::table_for(int bits) const {
  for (const auto& t : tables) {
    if (t.bits == bits) return t;
  }
  throw std::out_of_range("no centroid table for " + std::to_string(bits) + " bits");
}

void PqzModel::validate() const {
  if (!is_power_of_two(block_size) || block_size > 0xffffffffu) {
    throw std::invalid_argument("model block size must be a power of two");
  }
  if (tables.size() > 255) throw std::invalid_argument("too many centroid tables");
  std::set<int> table_bits;
  for (const auto& t : tables) {
    validate_table(t);
    if (t.bits < 2 || t.bits > 8 || t.levels() != (std::size_t{1} << t.bits) ||
        !table_bits.insert(t.bits).second) {
      throw std::invalid_argument("invalid or duplicate centroid table for " +
                                  std::to_string(t.bits) + " bits");
    }
  }
  std::set<std::string> names;
  for (const auto& q : tensors) {
    q.validate();
    if (!names.insert(q.name).second) {
      throw std::invalid_argument("duplicate tensor name '" + q.name + "'");
    }
    if (!q.is_passthrough()) {
      if (q.block_size != block_size) {
        throw std::invalid_argument("tensor '" + q.name + "' block size differs from the model's");
      }
      if (!table_bits.contains(q.bits)) {
        throw std::invalid_argument("tensor '" + q.name + "' references a missing " +
                                    std::to_string(q.bits) + "-bit table");
      }
    }
  }
}

CentroidTable stored_table(int bits) {
  const CentroidTable& solved = gaussian_table(bits);
  std::vector<double> rounded;
  rounded.reserve(solved.levels());
  for (double c : solved.centroids) rounded.push_back(static_cast<float>(c));
  return CentroidTable::from_centroids(std::move(rounded));
}

PqzModel make_pqz_model(std::vector<QuantizedTensor> tensors, std::size_t block_size) {
  PqzModel model;
  model.block_size = block_size;
  std::set<int> bits;
  for (const auto& q : tensors) {
    if (!q.is_passthrough()) bits.insert(q.bits);
  }
  for (int b : bits) model.tables.push_back(stored_table(b));
  model.tensors = std::move(tensors);
  model.validate();
  return model;
}

std::vector<std::uint8_t> encode_pqz(const PqzModel& model) {
  model.validate();
  Writer w;
  w.bytes("PQZ1", 4);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(model.block_size));
  w.u8(static_cast<std::uint8_t>(model.tables.size()));
  for (const auto& t : model.tables) {
    w.u8(static_cast<std::uint8_t>(t.bits));
    for (double c : t.centroids) w.f32(static_cast<float>(c));
  }
  w.u32(static_cast<std::uint32_t>(model.tensors.size()));
  for (const auto& q : model.tensors) {
    w.name(q.name);
    write_shape(w, q.shape);
    w.u64(q.original_len);
    w.u8(static_cast<std::uint8_t>(q.bits));
    w.u64(q.num_blocks());
    w.u8(q.channel_scales ? kFlagChannelScales : 0);
    w.bytes(q.codes.data(), q.codes.size());
    for (auto n : q.norms) w.u16(n);
    if (q.channel_scales) {
      for (float s : *q.channel_scales) w.f32(s);
    }
    for (auto h : q.half_values) w.u16(h);
  }
  return w.take();
}

PqzModel decode_pqz(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("PQZ1");
  r.version();
  PqzModel model;
  const std::uint64_t bs_at = r.offset();
  const std::uint32_t block_size = r.u32("block size");
  if (!is_power_of_two(block_size) || block_size > (1u << 16)) {
    r.fail_at(bs_at, "block size " + std::to_string(block_size) + " is not a power of two <= 65536");
  }
  model.block_size = block_size;

  const std::uint8_t n_tables = r.u8("table count");
  std::set<int> table_bits;
  for (std::uint8_t k = 0; k < n_tables; ++k) {
    const std::uint64_t at = r.offset();
    const int bits = r.u8("table bits");
    if (bits < 2 || bits > 8) r.fail_at(at, "centroid table bits " + std::to_string(bits) + " outside [2, 8]");
    if (!table_bits.insert(bits).second) r.fail_at(at, "duplicate centroid table for " + std::to_string(bits) + " bits");
    std::vector<double> centroids(std::size_t{1} << bits);
    for (auto& c : centroids) c = r.f32("centroids");
    for (std::size_t i = 0; i < centroids.size(); ++i) {
      if (!std::isfinite(centroids[i]) || (i > 0 && !(centroids[i - 1] < centroids[i]))) {
        r.fail_at(at, "centroid table for " + std::to_string(bits) + " bits is not strictly increasing");
      }
    }
    model.tables.push_back(CentroidTable::from_centroids(std::move(centroids)));
  }

  const std::uint32_t count = r.u32("tensor count");
  std::set<std::string> names;
  for (std::uint32_t t = 0; t < count; ++t) {
    r.set_context("");
    const std::uint64_t name_at = r.offset();
    QuantizedTensor q;
    q.name = r.name();
    r.set_context(q.name);
    if (!names.insert(q.name).second) r.fail_at(name_at, "duplicate tensor name");
    const std::uint64_t shape_at = r.offset();
    q.shape = read_shape(r);
    const std::uint64_t numel = checked_numel(r, q.shape, shape_at);
    const std::uint64_t len_at = r.offset();
    q.original_len = r.u64("original_len");
    if (q.original_len != numel) {
      r.fail_at(len_at, "original_len " + std::to_string(q.original_len) + " does not match shape " +
                            shape_to_string(q.shape));
    }
    const std::uint64_t bits_at = r.offset();
    q.bits = r.u8("bits");
    if (q.bits != kPassthroughBits && !table_bits.contains(q.bits)) {
      r.fail_at(bits_at, "bits " + std::to_string(q.bits) + " has no centroid table");
    }
    q.block_size = block_size;
    const std::uint64_t blocks_at = r.offset();
    const std::uint64_t n_blocks = r.u64("num_blocks");
    const std::uint64_t expected_blocks =
        q.is_passthrough() ? 0 : (q.original_len + block_size - 1) / block_size;
    if (n_blocks != expected_blocks) {
      r.fail_at(blocks_at, "num_blocks " + std::to_string(n_blocks) + ", expected " +
                               std::to_string(expected_blocks));
    }
    const std::uint64_t flags_at = r.offset();
    const std::uint8_t flags = r.u8("flags");
    if (flags & ~kFlagChannelScales) r.fail_at(flags_at, "unknown flag bits");
    const bool has_scales = flags & kFlagChannelScales;
    if (has_scales && (q.is_passthrough() || q.shape.size() != 2)) {
      r.fail_at(flags_at, "channel scales flagged on a tensor that cannot carry them");
    }

    if (!q.is_passthrough()) {
      const std::uint64_t codes_at = r.offset();
      r.need_elements(n_blocks, block_size, "codes");
      auto codes = r.bytes(n_blocks * block_size, "codes");
      const unsigned limit = 1u << q.bits;
      for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] >= limit) {
          r.fail_at(codes_at + i, "code " + std::to_string(codes[i]) + " out of range for " +
                                      std::to_string(q.bits) + " bits");
        }
      }
      q.codes.assign(codes.begin(), codes.end());
      r.need_elements(n_blocks, 2, "norms");
      q.norms.resize(n_blocks);
      for (auto& n : q.norms) {
        const std::uint64_t at = r.offset();
        n = r.u16("norms");
        if (!half_is_valid_norm(n)) r.fail_at(at, "norm is negative or non-finite");
      }
      if (has_scales) {
        std::vector<float> scales(q.shape[1]);
        r.need_elements(scales.size(), 4, "channel scales");
        for (auto& s : scales) {
          const std::uint64_t at = r.offset();
          s = r.f32("channel scales");
          if (!std::isfinite(s) || !(s > 0.0f)) r.fail_at(at, "channel scale not finite and positive");
        }
        q.channel_scales = std::move(scales);
      }
    } else {
      r.need_elements(q.original_len, 2, "binary16 payload");
      q.half_values.resize(q.original_len);
      for (auto& h : q.half_values) {
        const std::uint64_t at = r.offset();
        h = r.u16("binary16 payload");
        if ((h & 0x7c00u) == 0x7c00u) r.fail_at(at, "non-finite binary16 value");
      }
    }
    model.tensors.push_back(std::move(q));
  }
  r.set_context("");
  r.finish();
  return model;
}

// --- files ---

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("error reading '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("error writing '" + path.string() + "'");
}

void write_rtz(const std::filesystem::path& path, std::span<const RtzEntry> entries) {
  write_file_bytes(path, encode_rtz(entries));
}

void write_rtz(const std::filesystem::path& path, std::span<const DenseTensor> tensors) {
  std::vector<RtzEntry> entries;
  entries.reserve(tensors.size());
  for (const auto& t : tensors) entries.push_back({t, RtzDType::f32});
  write_rtz(path, entries);
}

std::vector<RtzEntry> read_rtz(const std::filesystem::path& path) {
  return decode_rtz(read_file_bytes(path));
}

std::vector<DenseTensor> read_rtz_tensors(const std::filesystem::path& path) {
  std::vector<DenseTensor> out;
  for (auto& e : read_rtz(path)) out.push_back(std::move(e.tensor));
  return out;
}

void write_pqz(const std::filesystem::path& path, const PqzModel& model) {
  write_file_bytes(path, encode_pqz(model));
}

PqzModel read_pqz(const std::filesystem::path& path) { return decode_pqz(read_file_bytes(path)); }

}  // namespace polarquant
