#pragma once

// Binary vector file ("TXVE"): one on-disk format for both label and
// document embeddings.
//
//   magic "TXVE" | format version u16 | dim u32 | count u64    (little-endian)
//   then per record: id length u16 | id bytes (UTF-8) | dim x f32 LE
//
// The layout is byte-stable: writing the same records twice produces
// identical files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "retag/errors.hpp"
#include "retag/types.hpp"
#include "retag/vector_math.hpp"

namespace retag {

inline constexpr std::uint16_t kVectorFileVersion = 1;

struct VectorRecord {
  std::string id;
  EmbeddingVector vec;
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class ByteReader {
 public:
  ByteReader(const char* data, std::size_t size) : data_(data), size_(size) {}

  bool read(void* dst, std::size_t n) {
    if (pos_ + n > size_) return false;
    std::memcpy(dst, data_ + pos_, n);
    pos_ += n;
    return true;
  }

  bool get_u16(std::uint16_t& v) {
    unsigned char b[2];
    if (!read(b, 2)) return false;
    v = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    return true;
  }

  bool get_u32(std::uint32_t& v) {
    unsigned char b[4];
    if (!read(b, 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
  }

  bool get_u64(std::uint64_t& v) {
    std::uint32_t lo = 0, hi = 0;
    if (!get_u32(lo) || !get_u32(hi)) return false;
    v = static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
    return true;
  }

  bool get_f32(float& v) {
    std::uint32_t bits = 0;
    if (!get_u32(bits)) return false;
    v = std::bit_cast<float>(bits);
    return true;
  }

  std::size_t remaining() const { return size_ - pos_; }

 private:
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_vector_file(const std::vector<VectorRecord>& records) {
  std::size_t dim = records.empty() ? 0 : records.front().vec.dim();
  for (const auto& r : records) {
    if (r.vec.dim() != dim)
      fail(Errc::DimensionMismatch, "record '" + r.id + "' has dimension " +
                                        std::to_string(r.vec.dim()) + ", expected " +
                                        std::to_string(dim));
    if (r.id.size() > 0xffff)
      fail(Errc::IoError, "record id longer than 65535 bytes: '" + r.id.substr(0, 32) + "...'");
  }
  std::string out;
  out.reserve(18 + records.size() * (2 + 16 + dim * 4));
  out += "TXVE";
  detail::put_u16(out, kVectorFileVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(dim));
  detail::put_u64(out, static_cast<std::uint64_t>(records.size()));
  for (const auto& r : records) {
    detail::put_u16(out, static_cast<std::uint16_t>(r.id.size()));
    out += r.id;
    for (float f : r.vec.values) detail::put_f32(out, f);
  }
  return out;
}

inline std::vector<VectorRecord> decode_vector_file(const std::string& bytes,
                                                    const std::string& origin = "<memory>") {
  detail::ByteReader rd(bytes.data(), bytes.size());
  char magic[4];
  if (!rd.read(magic, 4) || std::memcmp(magic, "TXVE", 4) != 0)
    fail(Errc::CorruptHeader, origin + ": bad magic, not a TXVE vector file");
  std::uint16_t version = 0;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  if (!rd.get_u16(version) || !rd.get_u32(dim) || !rd.get_u64(count))
    fail(Errc::CorruptHeader, origin + ": truncated header");
  if (version != kVectorFileVersion)
    fail(Errc::CorruptHeader,
         origin + ": unsupported format version " + std::to_string(version));

  std::vector<VectorRecord> records;
  records.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint16_t id_len = 0;
    if (!rd.get_u16(id_len))
      fail(Errc::CountMismatch, origin + ": header promises " + std::to_string(count) +
                                    " records, file ends after " + std::to_string(i));
    VectorRecord rec;
    rec.id.resize(id_len);
    if (id_len > 0 && !rd.read(rec.id.data(), id_len))
      fail(Errc::CountMismatch, origin + ": truncated record id at record " + std::to_string(i));
    rec.vec.values.resize(dim);
    for (std::uint32_t d = 0; d < dim; ++d) {
      if (!rd.get_f32(rec.vec.values[d]))
        fail(Errc::CountMismatch, origin + ": truncated vector at record " + std::to_string(i));
    }
    if (!all_finite(rec.vec))
      fail(Errc::NonFiniteEntry,
           origin + ": record '" + rec.id + "' contains a non-finite entry");
    records.push_back(std::move(rec));
  }
  if (rd.remaining() != 0)
    fail(Errc::CountMismatch, origin + ": " + std::to_string(rd.remaining()) +
                                  " trailing bytes after the last record");
  return records;
}

inline void write_vector_file(const std::string& path, const std::vector<VectorRecord>& records) {
  const std::string bytes = encode_vector_file(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(Errc::IoError, "failed writing '" + path + "'");
}

inline std::vector<VectorRecord> load_vector_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_vector_file(bytes, path);
}

}  // namespace retag
