#ifndef SIMT_DEVICE_ARRAY_HPP
#define SIMT_DEVICE_ARRAY_HPP

#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "simt/device.hpp"
#include "simt/memory.hpp"

namespace simt {

/// Array element types. The numeric values are the .sarr dtype codes.
enum class DType : std::uint8_t { f32 = 0, f64 = 1, i32 = 2, i64 = 3, c64 = 4, c128 = 5 };

constexpr std::size_t itemsize(DType d) noexcept {
  switch (d) {
    case DType::f32:
    case DType::i32: return 4;
    case DType::f64:
    case DType::i64:
    case DType::c64: return 8;
    case DType::c128: return 16;
  }
  return 0;
}

const char* to_string(DType d) noexcept;
/// Throws ArgumentError for codes outside 0..5.
DType dtype_from_code(unsigned code);
Scalar scalar_of(DType d) noexcept;
/// DTypeError for scalars with no array dtype (u32, void).
DType dtype_of(Scalar s);
constexpr bool is_complex(DType d) noexcept { return d == DType::c64 || d == DType::c128; }
constexpr bool is_integer(DType d) noexcept { return d == DType::i32 || d == DType::i64; }
/// Real component dtype; identity for real dtypes.
DType real_dtype(DType d) noexcept;

template <class T>
struct dtype_for;
template <> struct dtype_for<float> { static constexpr DType value = DType::f32; };
template <> struct dtype_for<double> { static constexpr DType value = DType::f64; };
template <> struct dtype_for<std::int32_t> { static constexpr DType value = DType::i32; };
template <> struct dtype_for<std::int64_t> { static constexpr DType value = DType::i64; };
template <> struct dtype_for<std::complex<float>> { static constexpr DType value = DType::c64; };
template <> struct dtype_for<std::complex<double>> { static constexpr DType value = DType::c128; };

using Shape = std::vector<std::uint64_t>;

/// Product of the extents; 1 for the scalar shape ().
std::uint64_t shape_size(const Shape& shape);
std::string to_string(const Shape& shape);

/// Host-side array: row-major, little-endian payload.
struct HostArray {
  Shape shape;
  DType dtype = DType::f32;
  std::vector<std::byte> data;

  std::uint64_t size() const { return shape_size(shape); }

  template <class T>
  static HostArray from(Shape shape, const std::vector<T>& values) {
    HostArray h;
    h.shape = std::move(shape);
    h.dtype = dtype_for<T>::value;
    h.data.resize(values.size() * sizeof(T));
    if (!values.empty()) std::memcpy(h.data.data(), values.data(), h.data.size());
    return h;
  }
  template <class T>
  static HostArray from(const std::vector<T>& values) {
    return from(Shape{values.size()}, values);
  }

  /// Elements as T; DTypeError unless T matches the dtype.
  template <class T>
  std::vector<T> values() const {
    if (dtype_for<T>::value != dtype) {
      throw DTypeError(std::string("host array holds ") + to_string(dtype) + ", not " +
                       to_string(dtype_for<T>::value));
    }
    std::vector<T> out(data.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), data.data(), out.size() * sizeof(T));
    return out;
  }
  template <class T>
  T item(std::size_t k = 0) const {
    return values<T>().at(k);
  }

  /// Throws ArgumentError unless the payload length matches shape and dtype.
  void validate() const;

  friend bool operator==(const HostArray&, const HostArray&) = default;
};

/// A host scalar operand: integer, real or complex.
class Number {
 public:
  enum class Kind : std::uint8_t { integer, real, complex };

  template <class T>
    requires std::is_integral_v<T>
  Number(T v) : kind_(Kind::integer), i_(static_cast<std::int64_t>(v)) {}  // NOLINT
  Number(float v) : kind_(Kind::real), r_(v) {}                             // NOLINT
  Number(double v) : kind_(Kind::real), r_(v) {}                            // NOLINT
  Number(std::complex<float> v) : kind_(Kind::complex), c_(v) {}            // NOLINT
  Number(std::complex<double> v) : kind_(Kind::complex), c_(v) {}           // NOLINT

  Kind kind() const noexcept { return kind_; }
  std::int64_t as_integer() const noexcept { return i_; }
  double as_real() const noexcept { return kind_ == Kind::integer ? static_cast<double>(i_) : r_; }
  std::complex<double> as_complex() const noexcept {
    return kind_ == Kind::complex ? c_ : std::complex<double>(as_real(), 0.0);
  }

  /// The value as an argument of dtype `d`. With `exact`, integers must fit
  /// and reals may not go to integer dtypes nor complex to real ones
  /// (ArgumentError).
  TaggedValue to_tagged(DType d, bool exact) const;
  std::string to_string() const;

 private:
  Kind kind_;
  std::int64_t i_ = 0;
  double r_ = 0;
  std::complex<double> c_;
};

/// Result dtype of `array op scalar`: integer arrays with a real scalar give
/// f64, real arrays with a complex scalar give the complex type of the
/// wider real part, otherwise the array dtype.
DType promote(DType array, Number::Kind scalar);

/// Shaped, typed, contiguous device array. Allocates from the context's
/// default pool unless another pool is given. Move-only; copy() duplicates.
class DeviceArray {
 public:
  /// Contents uninitialized.
  DeviceArray(Context& ctx, Shape shape, DType dtype, std::optional<MemoryPool> pool = std::nullopt);

  DeviceArray(DeviceArray&&) noexcept = default;
  DeviceArray& operator=(DeviceArray&&) noexcept = default;

  const Shape& shape() const noexcept { return shape_; }
  DType dtype() const noexcept { return dtype_; }
  std::uint64_t size() const noexcept { return size_; }
  std::uint64_t nbytes() const noexcept { return size_ * itemsize(dtype_); }
  std::size_t ndim() const noexcept { return shape_.size(); }
  /// Null for empty arrays.
  DevicePtr ptr() const noexcept { return alloc_.ptr(); }
  Context& context() const noexcept { return ctx_; }
  const DeviceAllocation& allocation() const noexcept { return alloc_; }

  HostArray get() const;
  /// Overwrites the contents from a host array of identical shape and dtype.
  void set(const HostArray& host);
  /// ArgumentError when `value` cannot be stored exactly in the dtype.
  void fill(const Number& value);
  DeviceArray copy() const;

 private:
  mutable Context ctx_;
  Shape shape_;
  DType dtype_;
  std::uint64_t size_ = 0;
  DeviceAllocation alloc_;
};

DeviceArray to_device(Context& ctx, const HostArray& host, std::optional<MemoryPool> pool = std::nullopt);
inline HostArray get(const DeviceArray& a) { return a.get(); }
inline void fill(DeviceArray& a, const Number& v) { a.fill(v); }
DeviceArray zeros(Context& ctx, Shape shape, DType dtype);
DeviceArray full(Context& ctx, Shape shape, DType dtype, const Number& value);

enum class BinaryOp : std::uint8_t { add, sub, mul, div };
enum class UnaryFn : std::uint8_t { neg, abs, exp, log, sqrt, sin, cos, conj };
const char* to_string(BinaryOp op) noexcept;
const char* to_string(UnaryFn fn) noexcept;

/// Array-array: identical shape (ShapeError) and dtype (DTypeError).
DeviceArray binary_op(const DeviceArray& a, const DeviceArray& b, BinaryOp op);
DeviceArray binary_op(const DeviceArray& a, const Number& b, BinaryOp op);
/// `b op a`, the scalar on the left.
DeviceArray binary_op(const Number& b, const DeviceArray& a, BinaryOp op);

/// abs of complex gives the real dtype; exp/log/sqrt/sin/cos of integer
/// arrays give f64; conj is defined for complex dtypes only.
DeviceArray unary_math(const DeviceArray& a, UnaryFn fn);

inline DeviceArray operator+(const DeviceArray& a, const DeviceArray& b) { return binary_op(a, b, BinaryOp::add); }
inline DeviceArray operator-(const DeviceArray& a, const DeviceArray& b) { return binary_op(a, b, BinaryOp::sub); }
inline DeviceArray operator*(const DeviceArray& a, const DeviceArray& b) { return binary_op(a, b, BinaryOp::mul); }
inline DeviceArray operator/(const DeviceArray& a, const DeviceArray& b) { return binary_op(a, b, BinaryOp::div); }
inline DeviceArray operator+(const DeviceArray& a, const Number& b) { return binary_op(a, b, BinaryOp::add); }
inline DeviceArray operator-(const DeviceArray& a, const Number& b) { return binary_op(a, b, BinaryOp::sub); }
inline DeviceArray operator*(const DeviceArray& a, const Number& b) { return binary_op(a, b, BinaryOp::mul); }
inline DeviceArray operator/(const DeviceArray& a, const Number& b) { return binary_op(a, b, BinaryOp::div); }
inline DeviceArray operator+(const Number& b, const DeviceArray& a) { return binary_op(b, a, BinaryOp::add); }
inline DeviceArray operator-(const Number& b, const DeviceArray& a) { return binary_op(b, a, BinaryOp::sub); }
inline DeviceArray operator*(const Number& b, const DeviceArray& a) { return binary_op(b, a, BinaryOp::mul); }
inline DeviceArray operator/(const Number& b, const DeviceArray& a) { return binary_op(b, a, BinaryOp::div); }
inline DeviceArray operator-(const DeviceArray& a) { return unary_math(a, UnaryFn::neg); }

/// Values in [0, 1) from a seeded splitmix64 stream, generated on the host.
DeviceArray uniform_random(Context& ctx, Shape shape, DType dtype, std::uint64_t seed);

/// Shape () result on the device. Complex dot conjugates the first operand.
DeviceArray dot(const DeviceArray& a, const DeviceArray& b);
DeviceArray sum(const DeviceArray& a);

}  // namespace simt

#endif  // SIMT_DEVICE_ARRAY_HPP
