#include "ddcbf/util/binary_io.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace ddcbf::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed large buffers in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const std::size_t n = std::min(kChunk, bytes.size() - off);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  // Write to a sibling temp file and rename so readers never see a partial
  // file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failure on '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp + "': " + ec.message());
}

void write_checked_file(const std::string& path, ByteWriter& writer) {
  const std::uint32_t crc = crc32(writer.bytes());
  writer.u32(crc);
  write_file(path, writer.bytes());
}

std::vector<std::uint8_t> read_checked_file(const std::string& path) {
  auto bytes = read_file(path);
  if (bytes.size() < 4)
    throw ChecksumError("'" + path + "' is too short to carry a checksum");
  const std::size_t body = bytes.size() - 4;
  ByteReader footer(std::span<const std::uint8_t>(bytes).subspan(body));
  const std::uint32_t stored = footer.u32();
  const std::uint32_t actual =
      crc32(std::span<const std::uint8_t>(bytes).first(body));
  if (stored != actual)
    throw ChecksumError("checksum mismatch in '" + path + "'");
  bytes.resize(body);
  return bytes;
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ddcbf::io
