#ifndef SIMT_TYPES_HPP
#define SIMT_TYPES_HPP

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>

namespace simt {

/// Scalar types of the kernel language. c64 is a pair of f32, c128 a pair
/// of f64.
enum class Scalar : std::uint8_t { void_, i32, u32, i64, f32, f64, c64, c128 };

constexpr std::size_t size_of(Scalar s) noexcept {
  switch (s) {
    case Scalar::void_: return 0;
    case Scalar::i32:
    case Scalar::u32:
    case Scalar::f32: return 4;
    case Scalar::i64:
    case Scalar::f64:
    case Scalar::c64: return 8;
    case Scalar::c128: return 16;
  }
  return 0;
}

constexpr bool is_integer(Scalar s) noexcept {
  return s == Scalar::i32 || s == Scalar::u32 || s == Scalar::i64;
}
constexpr bool is_floating(Scalar s) noexcept { return s == Scalar::f32 || s == Scalar::f64; }
constexpr bool is_complex(Scalar s) noexcept { return s == Scalar::c64 || s == Scalar::c128; }
constexpr bool is_real(Scalar s) noexcept { return is_integer(s) || is_floating(s); }
constexpr bool is_arithmetic(Scalar s) noexcept { return is_real(s) || is_complex(s); }

/// Real component type of a complex scalar; identity for reals.
constexpr Scalar real_part(Scalar s) noexcept {
  if (s == Scalar::c64) return Scalar::f32;
  if (s == Scalar::c128) return Scalar::f64;
  return s;
}

const char* to_string(Scalar s) noexcept;
/// Kernel-language spelling (`float`, `unsigned int`, `complexf`, ...).
const char* c_name(Scalar s) noexcept;

/// A value type in the kernel language: a scalar or a pointer to a scalar.
struct Type {
  Scalar scalar = Scalar::void_;
  bool pointer = false;

  static constexpr Type of(Scalar s) noexcept { return Type{s, false}; }
  static constexpr Type pointer_to(Scalar s) noexcept { return Type{s, true}; }

  constexpr bool is_void() const noexcept { return !pointer && scalar == Scalar::void_; }
  constexpr bool is_scalar(Scalar s) const noexcept { return !pointer && scalar == s; }
  constexpr std::size_t size() const noexcept { return pointer ? 8 : size_of(scalar); }

  friend constexpr bool operator==(Type, Type) noexcept = default;
};

std::string to_string(Type t);

/// A byte address in a device's global memory. Address 0 is never valid.
struct DevicePtr {
  std::uint64_t address = 0;

  constexpr DevicePtr() noexcept = default;
  constexpr explicit DevicePtr(std::uint64_t a) noexcept : address(a) {}

  constexpr DevicePtr operator+(std::uint64_t offset) const noexcept {
    return DevicePtr{address + offset};
  }
  friend constexpr bool operator==(DevicePtr, DevicePtr) noexcept = default;
};

/// Grid or block extents. Missing trailing extents are 1.
struct Dim3 {
  std::uint32_t x = 1;
  std::uint32_t y = 1;
  std::uint32_t z = 1;

  constexpr Dim3() noexcept = default;
  constexpr Dim3(std::uint32_t x_, std::uint32_t y_ = 1, std::uint32_t z_ = 1) noexcept
      : x(x_), y(y_), z(z_) {}

  constexpr std::uint64_t volume() const noexcept {
    return std::uint64_t{x} * y * z;
  }
  friend constexpr bool operator==(Dim3, Dim3) noexcept = default;
};

std::string to_string(Dim3 d);

/// Argument tag for kernel calls; the tag determines width and meaning.
enum class ArgTag : std::uint8_t { i32, u32, i64, f32, f64, c64, c128, ptr };

const char* to_string(ArgTag tag) noexcept;

/// A sized kernel argument, the analog of passing numpy sized scalars.
using TaggedValue = std::variant<std::int32_t, std::uint32_t, std::int64_t, float, double,
                                 std::complex<float>, std::complex<double>, DevicePtr>;

inline ArgTag tag_of(const TaggedValue& v) noexcept { return static_cast<ArgTag>(v.index()); }

/// The tag a parameter of type `t` expects.
ArgTag tag_for(Type t) noexcept;

}  // namespace simt

#endif  // SIMT_TYPES_HPP
