#include "simt/sarr.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <string>

namespace simt {

namespace {

constexpr char magic[4] = {'S', 'A', 'R', 'R'};

// Components are the unit of byte order: complex values swap each half.
std::size_t component_size(DType d) { return is_complex(d) ? itemsize(d) / 2 : itemsize(d); }

void to_little_endian(std::vector<std::byte>& bytes, std::size_t width) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t k = 0; k + width <= bytes.size(); k += width) std::reverse(bytes.begin() + k, bytes.begin() + k + width);
  } else {
    (void)bytes;
    (void)width;
  }
}

std::uint64_t read_u64(std::istream& in) {
  std::uint8_t b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("sarr: truncated dimension list");
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
  return v;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  out.write(b, 8);
}

}  // namespace

HostArray read_sarr(std::istream& in) {
  char head[7];
  if (!in.read(head, 7)) throw FormatError("sarr: truncated header");
  if (std::memcmp(head, magic, 4) != 0) throw FormatError("sarr: bad magic");
  auto version = static_cast<std::uint8_t>(head[4]);
  if (version != sarr_version) throw FormatError("sarr: unsupported version " + std::to_string(version));
  auto code = static_cast<std::uint8_t>(head[5]);
  if (code > 5) throw FormatError("sarr: unknown dtype code " + std::to_string(code));
  HostArray a;
  a.dtype = static_cast<DType>(code);
  auto ndim = static_cast<std::uint8_t>(head[6]);
  std::uint64_t count = 1;
  for (int k = 0; k < ndim; ++k) {
    std::uint64_t d = read_u64(in);
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / itemsize(a.dtype) / d) {
      throw FormatError("sarr: dimensions overflow");
    }
    count *= d;
    a.shape.push_back(d);
  }
  const std::uint64_t nbytes = count * itemsize(a.dtype);
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> data(raw.size());
  std::memcpy(data.data(), raw.data(), raw.size());
  if (data.size() != nbytes) {
    throw FormatError("sarr: payload has " + std::to_string(data.size()) + " bytes, shape " + to_string(a.shape) +
                      " of " + to_string(a.dtype) + " needs " + std::to_string(nbytes));
  }
  to_little_endian(data, component_size(a.dtype));
  a.data = std::move(data);
  return a;
}

void write_sarr(std::ostream& out, const HostArray& a) {
  a.validate();
  if (a.shape.size() > 255) throw FormatError("sarr: more than 255 dimensions");
  out.write(magic, 4);
  const char tail[3] = {static_cast<char>(sarr_version), static_cast<char>(a.dtype),
                        static_cast<char>(a.shape.size())};
  out.write(tail, 3);
  for (std::uint64_t d : a.shape) write_u64(out, d);
  std::vector<std::byte> data = a.data;
  to_little_endian(data, component_size(a.dtype));
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

HostArray load_sarr(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_sarr(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_sarr(const std::filesystem::path& path, const HostArray& a) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_sarr(out, a);
  out.flush();
  if (!out) throw IoError("error writing " + path.string());
}

}  // namespace simt
