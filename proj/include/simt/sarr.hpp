#ifndef SIMT_SARR_HPP
#define SIMT_SARR_HPP

#include <filesystem>
#include <iosfwd>

#include "simt/device_array.hpp"

// Array file form: "SARR", u8 version (1), u8 dtype code, u8 ndim,
// ndim x u64 dims, then the payload. All integers little-endian.

namespace simt {

inline constexpr std::uint8_t sarr_version = 1;

/// FormatError on a bad magic, unknown version or dtype, truncated or
/// trailing payload.
HostArray read_sarr(std::istream& in);
void write_sarr(std::ostream& out, const HostArray& a);

/// IoError when the file cannot be opened or written.
HostArray load_sarr(const std::filesystem::path& path);
void save_sarr(const std::filesystem::path& path, const HostArray& a);

}  // namespace simt

#endif  // SIMT_SARR_HPP
