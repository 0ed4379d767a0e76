#include "simt/device_array.hpp"

#include <cmath>
#include <limits>

#include "device/context_impl.hpp"
#include "device_array/registry.hpp"
#include "simt/kernel_gen.hpp"

namespace simt {

// --- dtypes -------------------------------------------------------------------

const char* to_string(DType d) noexcept {
  switch (d) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::i32: return "i32";
    case DType::i64: return "i64";
    case DType::c64: return "c64";
    case DType::c128: return "c128";
  }
  return "?";
}

DType dtype_from_code(unsigned code) {
  if (code > 5) throw ArgumentError("unsupported dtype code " + std::to_string(code));
  return static_cast<DType>(code);
}

Scalar scalar_of(DType d) noexcept {
  switch (d) {
    case DType::f32: return Scalar::f32;
    case DType::f64: return Scalar::f64;
    case DType::i32: return Scalar::i32;
    case DType::i64: return Scalar::i64;
    case DType::c64: return Scalar::c64;
    case DType::c128: return Scalar::c128;
  }
  return Scalar::void_;
}

DType dtype_of(Scalar s) {
  switch (s) {
    case Scalar::f32: return DType::f32;
    case Scalar::f64: return DType::f64;
    case Scalar::i32: return DType::i32;
    case Scalar::i64: return DType::i64;
    case Scalar::c64: return DType::c64;
    case Scalar::c128: return DType::c128;
    default: throw DTypeError(std::string("no array dtype for ") + to_string(s));
  }
}

DType real_dtype(DType d) noexcept {
  if (d == DType::c64) return DType::f32;
  if (d == DType::c128) return DType::f64;
  return d;
}

std::uint64_t shape_size(const Shape& shape) {
  std::uint64_t n = 1;
  for (std::uint64_t e : shape) {
    if (e != 0 && n > std::numeric_limits<std::uint64_t>::max() / e) throw ShapeError("shape size overflows");
    n *= e;
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    s += (k ? ", " : "") + std::to_string(shape[k]);
  }
  if (shape.size() == 1) s += ",";
  return s + ")";
}

void HostArray::validate() const {
  if (static_cast<unsigned>(dtype) > 5) throw ArgumentError("unsupported host dtype code " + std::to_string(static_cast<unsigned>(dtype)));
  std::uint64_t want = shape_size(shape) * itemsize(dtype);
  if (data.size() != want) {
    throw ArgumentError("host array payload is " + std::to_string(data.size()) + " bytes; shape " + to_string(shape) +
                        " of " + simt::to_string(dtype) + " needs " + std::to_string(want));
  }
}

// --- scalars ------------------------------------------------------------------

std::string Number::to_string() const {
  switch (kind_) {
    case Kind::integer: return std::to_string(i_);
    case Kind::real: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", r_);
      return buf;
    }
    case Kind::complex: {
      char buf[128];
      std::snprintf(buf, sizeof buf, "(%.17g%+.17gj)", c_.real(), c_.imag());
      return buf;
    }
  }
  return "?";
}

TaggedValue Number::to_tagged(DType d, bool exact) const {
  auto reject = [&](const char* why) -> TaggedValue {
    throw ArgumentError("scalar " + to_string() + " " + why + " " + simt::to_string(d));
  };
  if (exact) {
    if (kind_ == Kind::complex && !is_complex(d)) return reject("is complex and cannot be stored as");
    if (kind_ == Kind::real && is_integer(d)) return reject("is not an integer and cannot be stored as");
    if (kind_ == Kind::integer && d == DType::i32 &&
        (i_ < std::numeric_limits<std::int32_t>::min() || i_ > std::numeric_limits<std::int32_t>::max())) {
      return reject("is out of range for");
    }
  }
  switch (d) {
    case DType::i32:
      return kind_ == Kind::integer ? static_cast<std::int32_t>(i_) : static_cast<std::int32_t>(as_real());
    case DType::i64: return kind_ == Kind::integer ? i_ : static_cast<std::int64_t>(as_real());
    case DType::f32: return static_cast<float>(as_real());
    case DType::f64: return as_real();
    case DType::c64: return std::complex<float>(as_complex());
    case DType::c128: return as_complex();
  }
  return reject("cannot be stored as");
}

DType promote(DType array, Number::Kind scalar) {
  if (scalar == Number::Kind::integer || is_complex(array)) return array;
  if (scalar == Number::Kind::real) return is_integer(array) ? DType::f64 : array;
  return array == DType::f32 ? DType::c64 : DType::c128;
}

// --- arrays -------------------------------------------------------------------

DeviceArray::DeviceArray(Context& ctx, Shape shape, DType dtype, std::optional<MemoryPool> pool)
    : ctx_(ctx), shape_(std::move(shape)), dtype_(dtype), size_(shape_size(shape_)) {
  if (static_cast<unsigned>(dtype) > 5) throw ArgumentError("unsupported dtype");
  if (nbytes() == 0) return;
  MemoryPool p = pool ? *pool : default_pool(ctx);
  alloc_ = p.allocate(nbytes());
}

HostArray DeviceArray::get() const {
  HostArray h;
  h.shape = shape_;
  h.dtype = dtype_;
  h.data.resize(nbytes());
  if (nbytes()) memcpy_dtoh(ctx_, h.data.data(), ptr(), nbytes());
  return h;
}

void DeviceArray::set(const HostArray& host) {
  host.validate();
  if (host.shape != shape_) throw ShapeError("cannot set array of shape " + to_string(shape_) + " from " + to_string(host.shape));
  if (host.dtype != dtype_) {
    throw DTypeError(std::string("cannot set ") + to_string(dtype_) + " array from " + to_string(host.dtype));
  }
  if (nbytes()) memcpy_htod(ctx_, ptr(), host.data.data(), nbytes());
}

void DeviceArray::fill(const Number& value) {
  value.to_tagged(dtype_, true);  // rejects values the dtype cannot hold
  if (size_ == 0) return;
  const ElementwiseKernel& k = detail::registered<ElementwiseKernel>(ctx_, std::string("fill:") + to_string(dtype_), [&] {
    std::string t = c_name(scalar_of(dtype_));
    return ElementwiseKernel(ctx_, t + " *z, " + t + " v", "z[i] = v", std::string("fill_") + to_string(dtype_));
  });
  k({*this, value});
}

DeviceArray DeviceArray::copy() const {
  DeviceArray out(ctx_, shape_, dtype_);
  if (nbytes()) memcpy_dtod(ctx_, out.ptr(), ptr(), nbytes());
  return out;
}

DeviceArray to_device(Context& ctx, const HostArray& host, std::optional<MemoryPool> pool) {
  host.validate();
  DeviceArray a(ctx, host.shape, host.dtype, std::move(pool));
  if (a.nbytes()) memcpy_htod(ctx, a.ptr(), host.data.data(), a.nbytes());
  return a;
}

DeviceArray zeros(Context& ctx, Shape shape, DType dtype) { return full(ctx, std::move(shape), dtype, Number(0)); }

DeviceArray full(Context& ctx, Shape shape, DType dtype, const Number& value) {
  DeviceArray a(ctx, std::move(shape), dtype);
  a.fill(value);
  return a;
}

// --- elementwise arithmetic ---------------------------------------------------

const char* to_string(BinaryOp op) noexcept {
  switch (op) {
    case BinaryOp::add: return "add";
    case BinaryOp::sub: return "sub";
    case BinaryOp::mul: return "mul";
    case BinaryOp::div: return "div";
  }
  return "?";
}

const char* to_string(UnaryFn fn) noexcept {
  switch (fn) {
    case UnaryFn::neg: return "neg";
    case UnaryFn::abs: return "abs";
    case UnaryFn::exp: return "exp";
    case UnaryFn::log: return "log";
    case UnaryFn::sqrt: return "sqrt";
    case UnaryFn::sin: return "sin";
    case UnaryFn::cos: return "cos";
    case UnaryFn::conj: return "conj";
  }
  return "?";
}

namespace {

const char* symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return "+";
    case BinaryOp::sub: return "-";
    case BinaryOp::mul: return "*";
    case BinaryOp::div: return "/";
  }
  return "?";
}

std::string ctype(DType d) { return c_name(scalar_of(d)); }

void check_same_context(const DeviceArray& a, const DeviceArray& b) {
  if (!(a.context() == b.context())) throw ArgumentError("arrays belong to different contexts");
}

DeviceArray scalar_op(const DeviceArray& a, const Number& s, BinaryOp op, bool scalar_left) {
  DType out = promote(a.dtype(), s.kind());
  DType param = s.kind() == Number::Kind::complex ? out : real_dtype(out);
  s.to_tagged(param, true);
  DeviceArray z(a.context(), a.shape(), out);
  if (a.size() == 0) return z;
  std::string name = std::string(scalar_left ? "rscalar_" : "scalar_") + to_string(op) + "_" + to_string(a.dtype()) +
                     "_" + to_string(param) + "_" + to_string(out);
  const ElementwiseKernel& k = detail::registered<ElementwiseKernel>(a.context(), name, [&] {
    std::string expr = scalar_left ? std::string("s ") + symbol(op) + " x[i]" : std::string("x[i] ") + symbol(op) + " s";
    return ElementwiseKernel(a.context(), ctype(out) + " *z, " + ctype(a.dtype()) + " *x, " + ctype(param) + " s",
                             "z[i] = " + expr, name);
  });
  k({z, a, s});
  return z;
}

}  // namespace

DeviceArray binary_op(const DeviceArray& a, const DeviceArray& b, BinaryOp op) {
  check_same_context(a, b);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string("operands of ") + to_string(op) + " have shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  if (a.dtype() != b.dtype()) {
    throw DTypeError(std::string("operands of ") + to_string(op) + " have dtypes " + to_string(a.dtype()) + " and " +
                     to_string(b.dtype()));
  }
  DeviceArray z(a.context(), a.shape(), a.dtype());
  if (a.size() == 0) return z;
  std::string name = std::string("array_") + to_string(op) + "_" + to_string(a.dtype());
  const ElementwiseKernel& k = detail::registered<ElementwiseKernel>(a.context(), name, [&] {
    std::string t = ctype(a.dtype());
    return ElementwiseKernel(a.context(), t + " *z, " + t + " *x, " + t + " *y",
                             std::string("z[i] = x[i] ") + symbol(op) + " y[i]", name);
  });
  k({z, a, b});
  return z;
}

DeviceArray binary_op(const DeviceArray& a, const Number& b, BinaryOp op) { return scalar_op(a, b, op, false); }
DeviceArray binary_op(const Number& b, const DeviceArray& a, BinaryOp op) { return scalar_op(a, b, op, true); }

DeviceArray unary_math(const DeviceArray& a, UnaryFn fn) {
  DType in = a.dtype();
  DType out = in;
  std::string expr;
  const bool single = in == DType::f32;
  switch (fn) {
    case UnaryFn::neg: expr = "-x[i]"; break;
    case UnaryFn::abs:
      if (is_complex(in)) {
        out = real_dtype(in);
        expr = "cabs(x[i])";
      } else if (is_integer(in)) {
        expr = "abs(x[i])";
      } else {
        expr = single ? "fabsf(x[i])" : "fabs(x[i])";
      }
      break;
    case UnaryFn::exp:
    case UnaryFn::log:
    case UnaryFn::sqrt:
    case UnaryFn::sin:
    case UnaryFn::cos:
      if (is_integer(in)) out = DType::f64;
      expr = std::string(to_string(fn)) + (single ? "f" : "") + "(x[i])";
      break;
    case UnaryFn::conj:
      if (!is_complex(in)) throw DTypeError(std::string("conj is defined for complex arrays, got ") + to_string(in));
      expr = "conj(x[i])";
      break;
  }
  DeviceArray z(a.context(), a.shape(), out);
  if (a.size() == 0) return z;
  std::string name = std::string("unary_") + to_string(fn) + "_" + to_string(in);
  const ElementwiseKernel& k = detail::registered<ElementwiseKernel>(a.context(), name, [&] {
    return ElementwiseKernel(a.context(), ctype(out) + " *z, " + ctype(in) + " *x", "z[i] = " + expr, name);
  });
  k({z, a});
  return z;
}

// --- random -------------------------------------------------------------------

DeviceArray uniform_random(Context& ctx, Shape shape, DType dtype, std::uint64_t seed) {
  if (dtype != DType::f32 && dtype != DType::f64) {
    throw DTypeError(std::string("uniform_random supports f32 and f64, got ") + to_string(dtype));
  }
  std::uint64_t n = shape_size(shape);
  std::uint64_t state = seed;
  auto next = [&state] {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  HostArray h;
  h.shape = std::move(shape);
  h.dtype = dtype;
  if (dtype == DType::f32) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(next() >> 40) * 0x1.0p-24f;
    h = HostArray::from(h.shape, v);
  } else {
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(next() >> 11) * 0x1.0p-53;
    h = HostArray::from(h.shape, v);
  }
  return to_device(ctx, h);
}

// --- reductions ---------------------------------------------------------------

DeviceArray dot(const DeviceArray& a, const DeviceArray& b) {
  check_same_context(a, b);
  if (a.shape() != b.shape()) {
    throw ShapeError("dot operands have shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  if (a.dtype() != b.dtype()) {
    throw DTypeError(std::string("dot operands have dtypes ") + to_string(a.dtype()) + " and " + to_string(b.dtype()));
  }
  std::string name = std::string("dot_") + to_string(a.dtype());
  const ReductionKernel& k = detail::registered<ReductionKernel>(a.context(), name, [&] {
    std::string t = ctype(a.dtype());
    std::string map = is_complex(a.dtype()) ? "conj(x[i]) * y[i]" : "x[i] * y[i]";
    return ReductionKernel(a.context(), a.dtype(), "0", "a + b", map, t + " *x, " + t + " *y", name);
  });
  return k({a, b});
}

DeviceArray sum(const DeviceArray& a) {
  std::string name = std::string("sum_") + to_string(a.dtype());
  const ReductionKernel& k = detail::registered<ReductionKernel>(a.context(), name, [&] {
    return ReductionKernel(a.context(), a.dtype(), "0", "a + b", "x[i]", ctype(a.dtype()) + " *x", name);
  });
  return k({a});
}

}  // namespace simt
