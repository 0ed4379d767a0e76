#ifndef SIMT_SRC_SOURCE_MODULE_SERIALIZE_HPP
#define SIMT_SRC_SOURCE_MODULE_SERIALIZE_HPP

#include <cstdint>
#include <string>
#include <string_view>

#include "simt/kernel_lang.hpp"

namespace simt::detail {

inline constexpr std::uint16_t smod_version = 1;

/// Cache entry bytes: "SMOD", u16 version, module payload, SHA-256 of the
/// payload. All integers little-endian.
std::string serialize_module(const lang::KernelModule& module);

/// Throws FormatError on a bad magic, unknown version, checksum mismatch or
/// inconsistent node references.
lang::KernelModule deserialize_module(std::string_view bytes);

std::string sha256_hex(std::string_view data);

}  // namespace simt::detail

#endif  // SIMT_SRC_SOURCE_MODULE_SERIALIZE_HPP
