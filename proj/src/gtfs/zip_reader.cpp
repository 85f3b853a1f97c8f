#include "zip_reader.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mobsim::gtfs {

namespace {

constexpr std::uint32_t kEocdSig = 0x06054b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kLocalSig = 0x04034b50;

std::uint16_t rd16(const std::string& b, size_t off) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                    (static_cast<unsigned char>(b[off + 1]) << 8));
}

std::uint32_t rd32(const std::string& b, size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24);
}

std::string inflate_raw(const char* data, size_t compressed, size_t uncompressed) {
  std::string out(uncompressed, '\0');
  z_stream zs;
  std::memset(&zs, 0, sizeof zs);
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) {
    throw std::runtime_error("zip: inflateInit failed");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data));
  zs.avail_in = static_cast<uInt>(compressed);
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != uncompressed) {
    throw std::runtime_error("zip: inflate failed");
  }
  return out;
}

}  // namespace

bool looks_like_zip(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && magic[0] == 'P' && magic[1] == 'K';
}

std::map<std::string, std::string> read_zip(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("zip: cannot open " + path);
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 22) {
    throw std::runtime_error("zip: file too small");
  }

  // End-of-central-directory record: scan backwards (comment may follow it).
  size_t eocd = std::string::npos;
  size_t scan_start = bytes.size() >= 22 + 65535 ? bytes.size() - 22 - 65535 : 0;
  for (size_t i = bytes.size() - 22 + 1; i-- > scan_start;) {
    if (rd32(bytes, i) == kEocdSig) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string::npos) {
    throw std::runtime_error("zip: no end-of-central-directory record");
  }

  std::uint16_t entries = rd16(bytes, eocd + 10);
  std::uint32_t cd_offset = rd32(bytes, eocd + 16);

  std::map<std::string, std::string> out;
  size_t p = cd_offset;
  for (std::uint16_t e = 0; e < entries; ++e) {
    if (p + 46 > bytes.size() || rd32(bytes, p) != kCentralSig) {
      throw std::runtime_error("zip: bad central directory entry");
    }
    std::uint16_t method = rd16(bytes, p + 10);
    std::uint32_t csize = rd32(bytes, p + 20);
    std::uint32_t usize = rd32(bytes, p + 24);
    std::uint16_t name_len = rd16(bytes, p + 28);
    std::uint16_t extra_len = rd16(bytes, p + 30);
    std::uint16_t comment_len = rd16(bytes, p + 32);
    std::uint32_t local_off = rd32(bytes, p + 42);
    std::string name = bytes.substr(p + 46, name_len);
    p += 46 + name_len + extra_len + comment_len;

    if (!name.empty() && name.back() == '/') {
      continue;  // directory entry
    }
    if (local_off + 30 > bytes.size() || rd32(bytes, local_off) != kLocalSig) {
      throw std::runtime_error("zip: bad local header for " + name);
    }
    size_t data_off = local_off + 30 + rd16(bytes, local_off + 26) + rd16(bytes, local_off + 28);
    if (data_off + csize > bytes.size()) {
      throw std::runtime_error("zip: truncated entry " + name);
    }
    // Strip a single leading directory ("feed/stops.txt" -> "stops.txt").
    auto slash = name.rfind('/');
    std::string key = slash == std::string::npos ? name : name.substr(slash + 1);

    if (method == 0) {
      out[key] = bytes.substr(data_off, csize);
    } else if (method == 8) {
      out[key] = inflate_raw(bytes.data() + data_off, csize, usize);
    } else {
      throw std::runtime_error("zip: unsupported compression method for " + name);
    }
  }
  return out;
}

}  // namespace mobsim::gtfs
