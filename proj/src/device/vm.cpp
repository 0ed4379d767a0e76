#include "device/vm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <limits>
#include <mutex>
#include <type_traits>

namespace simt::detail {

std::string hex_address(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string describe_address(const GlobalMemory& memory, std::uint64_t address, std::uint64_t size) {
  auto range = [](std::uint64_t base, std::uint64_t len) {
    return "[" + hex_address(base) + ", " + hex_address(base + len) + ")";
  };
  if (memory.released) {
    for (auto it = memory.released->rbegin(); it != memory.released->rend(); ++it) {
      if (address >= it->first && address < it->first + it->second) {
        return "address lies in released allocation " + range(it->first, it->second);
      }
    }
  }
  if (memory.live && !memory.live->empty()) {
    auto it = memory.live->upper_bound(address);
    if (it != memory.live->begin()) {
      auto below = std::prev(it);
      std::uint64_t end = below->first + below->second;
      if (address < end) {
        return std::to_string(address + size - end) + " byte(s) past the end of allocation " +
               range(below->first, below->second);
      }
      return std::to_string(address - end) + " byte(s) past the end of allocation " +
             range(below->first, below->second);
    }
    return "address precedes every live allocation";
  }
  return "no live allocations";
}

namespace {

using lang::BinOp;
using lang::BuiltinFn;

struct SplitMix {
  using result_type = std::uint64_t;
  std::uint64_t state;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

[[noreturn]] void trap(const std::string& message) { throw Trap(message); }

// --- memory -------------------------------------------------------------------

class Memory {
 public:
  Memory(const GlobalMemory& g, std::byte* shared, std::uint64_t shared_size)
      : g_(g), shared_(shared), shared_size_(shared_size) {}

  // Returns the host location of [addr, addr+size); `in_shared` tells
  // whether it is block-private.
  std::byte* at(std::uint64_t addr, std::uint32_t size, std::uint32_t align, bool store, bool& in_shared) {
    if (addr >= lo_ && addr + size <= hi_ && addr < shared_window) {
      in_shared = false;
      if ((addr & (align - 1)) != 0) misaligned(addr, size, store);
      return g_.arena + addr;
    }
    return slow(addr, size, align, store, in_shared);
  }

 private:
  std::byte* slow(std::uint64_t addr, std::uint32_t size, std::uint32_t align, bool store, bool& in_shared) {
    if (addr >= shared_window) {
      std::uint64_t off = addr - shared_window;
      if (off > shared_size_ || size > shared_size_ - off) {
        throw OutOfBounds(addr, access(store, size) + " at shared address " + hex_address(addr) + " (offset " +
                                    std::to_string(off) + ", block has " + std::to_string(shared_size_) +
                                    " bytes of shared memory)");
      }
      if ((off & (align - 1)) != 0) misaligned(addr, size, store);
      in_shared = true;
      return shared_ + off;
    }
    auto it = g_.live->upper_bound(addr);
    if (it != g_.live->begin()) {
      --it;
      std::uint64_t end = it->first + it->second;
      if (addr + size <= end && addr + size > addr) {
        lo_ = it->first;
        hi_ = end;
        if ((addr & (align - 1)) != 0) misaligned(addr, size, store);
        in_shared = false;
        return g_.arena + addr;
      }
    }
    throw OutOfBounds(addr, access(store, size) + " at address " + hex_address(addr) + ": " +
                                describe_address(g_, addr, size));
  }

  static std::string access(bool store, std::uint32_t size) {
    return std::string("out-of-bounds ") + (store ? "store" : "load") + " of " + std::to_string(size) + " bytes";
  }

  [[noreturn]] static void misaligned(std::uint64_t addr, std::uint32_t size, bool store) {
    throw MisalignedAccess(addr, std::string("misaligned ") + (store ? "store" : "load") + " of " +
                                     std::to_string(size) + " bytes at address " + hex_address(addr));
  }

  const GlobalMemory& g_;
  std::byte* shared_;
  std::uint64_t shared_size_;
  std::uint64_t lo_ = 0;
  std::uint64_t hi_ = 0;
};

template <class T>
T load_raw(const std::byte* p, bool in_shared) {
  if (in_shared) {
    T v;
    std::memcpy(&v, p, sizeof v);
    return v;
  }
  return std::atomic_ref<T>(*const_cast<T*>(reinterpret_cast<const T*>(p))).load(std::memory_order_relaxed);
}

template <class T>
void store_raw(std::byte* p, T v, bool in_shared) {
  if (in_shared) {
    std::memcpy(p, &v, sizeof v);
    return;
  }
  std::atomic_ref<T>(*reinterpret_cast<T*>(p)).store(v, std::memory_order_relaxed);
}

std::uint32_t width(VT t) {
  switch (t) {
    case VT::i32:
    case VT::u32:
    case VT::f32: return 4;
    case VT::c64: return 8;
    case VT::c128: return 16;
    default: return 8;
  }
}

// Complex values are accessed as two components of their real type.
std::uint32_t alignment(VT t) {
  switch (t) {
    case VT::c64: return 4;
    case VT::c128: return 8;
    default: return width(t);
  }
}

Slot load(Memory& mem, VT t, std::uint64_t addr) {
  bool sh;
  std::byte* p = mem.at(addr, width(t), alignment(t), false, sh);
  Slot v{};
  switch (t) {
    case VT::i32:
    case VT::u32:
    case VT::f32: v.u32 = load_raw<std::uint32_t>(p, sh); break;
    case VT::c64: {
      std::uint32_t re = load_raw<std::uint32_t>(p, sh);
      std::uint32_t im = load_raw<std::uint32_t>(p + 4, sh);
      std::memcpy(&v.c64.re, &re, 4);
      std::memcpy(&v.c64.im, &im, 4);
      break;
    }
    case VT::c128: {
      std::uint64_t re = load_raw<std::uint64_t>(p, sh);
      std::uint64_t im = load_raw<std::uint64_t>(p + 8, sh);
      std::memcpy(&v.c128.re, &re, 8);
      std::memcpy(&v.c128.im, &im, 8);
      break;
    }
    default: v.u64 = load_raw<std::uint64_t>(p, sh); break;
  }
  return v;
}

void store(Memory& mem, VT t, std::uint64_t addr, const Slot& v) {
  bool sh;
  std::byte* p = mem.at(addr, width(t), alignment(t), true, sh);
  switch (t) {
    case VT::i32:
    case VT::u32:
    case VT::f32: store_raw<std::uint32_t>(p, v.u32, sh); break;
    case VT::c64: {
      std::uint32_t re, im;
      std::memcpy(&re, &v.c64.re, 4);
      std::memcpy(&im, &v.c64.im, 4);
      store_raw(p, re, sh);
      store_raw(p + 4, im, sh);
      break;
    }
    case VT::c128: {
      std::uint64_t re, im;
      std::memcpy(&re, &v.c128.re, 8);
      std::memcpy(&im, &v.c128.im, 8);
      store_raw(p, re, sh);
      store_raw(p + 8, im, sh);
      break;
    }
    default: store_raw<std::uint64_t>(p, v.u64, sh); break;
  }
}

template <class T>
T fetch_add(std::byte* p, T v, bool in_shared) {
  if (in_shared) {
    T old;
    std::memcpy(&old, p, sizeof old);
    T sum;
    if constexpr (std::is_integral_v<T>) {
      using U = std::make_unsigned_t<T>;
      sum = static_cast<T>(static_cast<U>(old) + static_cast<U>(v));
    } else {
      sum = old + v;
    }
    std::memcpy(p, &sum, sizeof sum);
    return old;
  }
  return std::atomic_ref<T>(*reinterpret_cast<T*>(p)).fetch_add(v, std::memory_order_relaxed);
}

Slot atomic_add(Memory& mem, VT t, std::uint64_t addr, const Slot& v) {
  bool sh;
  std::byte* p = mem.at(addr, width(t), alignment(t), true, sh);
  Slot old{};
  switch (t) {
    case VT::i32: old.i32 = fetch_add<std::int32_t>(p, v.i32, sh); break;
    case VT::u32: old.u32 = fetch_add<std::uint32_t>(p, v.u32, sh); break;
    case VT::i64: old.i64 = fetch_add<std::int64_t>(p, v.i64, sh); break;
    case VT::f32: old.f32 = fetch_add<float>(p, v.f32, sh); break;
    case VT::f64: old.f64 = fetch_add<double>(p, v.f64, sh); break;
    default: trap("atomicAdd on unsupported type");
  }
  return old;
}

// --- arithmetic ---------------------------------------------------------------

template <class T>
T int_bin(BinOp op, T a, T b) {
  using U = std::make_unsigned_t<T>;
  constexpr U mask = static_cast<U>(sizeof(T) * 8 - 1);
  switch (op) {
    case BinOp::add: return static_cast<T>(static_cast<U>(a) + static_cast<U>(b));
    case BinOp::sub: return static_cast<T>(static_cast<U>(a) - static_cast<U>(b));
    case BinOp::mul: return static_cast<T>(static_cast<U>(a) * static_cast<U>(b));
    case BinOp::div:
      if (b == 0) trap("integer division by zero");
      if constexpr (std::is_signed_v<T>) {
        if (a == std::numeric_limits<T>::min() && b == -1) return a;
      }
      return a / b;
    case BinOp::rem:
      if (b == 0) trap("integer remainder by zero");
      if constexpr (std::is_signed_v<T>) {
        if (a == std::numeric_limits<T>::min() && b == -1) return 0;
      }
      return a % b;
    case BinOp::shl: return static_cast<T>(static_cast<U>(a) << (static_cast<U>(b) & mask));
    case BinOp::shr: return static_cast<T>(a >> (static_cast<U>(b) & mask));
    case BinOp::bit_and: return a & b;
    case BinOp::bit_xor: return a ^ b;
    case BinOp::bit_or: return a | b;
    default: return 0;
  }
}

template <class T>
T float_bin(BinOp op, T a, T b) {
  switch (op) {
    case BinOp::add: return a + b;
    case BinOp::sub: return a - b;
    case BinOp::mul: return a * b;
    case BinOp::div: return a / b;
    default: return 0;
  }
}

template <class C, class T>
C complex_bin(BinOp op, C a, C b) {
  switch (op) {
    case BinOp::add: return C{a.re + b.re, a.im + b.im};
    case BinOp::sub: return C{a.re - b.re, a.im - b.im};
    case BinOp::mul: return C{a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    case BinOp::div: {
      T d = b.re * b.re + b.im * b.im;
      return C{(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
    }
    default: return C{0, 0};
  }
}

void bin(VT t, BinOp op, Slot& a, const Slot& b) {
  switch (t) {
    case VT::i32: a.i32 = int_bin(op, a.i32, b.i32); break;
    case VT::u32: a.u32 = int_bin(op, a.u32, b.u32); break;
    case VT::i64: a.i64 = int_bin(op, a.i64, b.i64); break;
    case VT::f32: a.f32 = float_bin(op, a.f32, b.f32); break;
    case VT::f64: a.f64 = float_bin(op, a.f64, b.f64); break;
    case VT::c64: a.c64 = complex_bin<C64, float>(op, a.c64, b.c64); break;
    case VT::c128: a.c128 = complex_bin<C128, double>(op, a.c128, b.c128); break;
    default: break;
  }
}

template <class T>
std::int32_t compare(BinOp op, T a, T b) {
  switch (op) {
    case BinOp::lt: return a < b;
    case BinOp::le: return a <= b;
    case BinOp::gt: return a > b;
    case BinOp::ge: return a >= b;
    case BinOp::eq: return a == b;
    case BinOp::ne: return a != b;
    default: return 0;
  }
}

std::int32_t cmp(VT t, BinOp op, const Slot& a, const Slot& b) {
  switch (t) {
    case VT::i32: return compare(op, a.i32, b.i32);
    case VT::u32: return compare(op, a.u32, b.u32);
    case VT::i64: return compare(op, a.i64, b.i64);
    case VT::ptr: return compare(op, a.u64, b.u64);
    case VT::f32: return compare(op, a.f32, b.f32);
    case VT::f64: return compare(op, a.f64, b.f64);
    case VT::c64: {
      bool eq = a.c64.re == b.c64.re && a.c64.im == b.c64.im;
      return op == BinOp::eq ? eq : !eq;
    }
    case VT::c128: {
      bool eq = a.c128.re == b.c128.re && a.c128.im == b.c128.im;
      return op == BinOp::eq ? eq : !eq;
    }
    default: return 0;
  }
}

bool is_zero(VT t, const Slot& v) {
  switch (t) {
    case VT::i32:
    case VT::u32: return v.u32 == 0;
    case VT::f32: return v.f32 == 0.0f;
    case VT::f64: return v.f64 == 0.0;
    case VT::c64: return v.c64.re == 0.0f && v.c64.im == 0.0f;
    case VT::c128: return v.c128.re == 0.0 && v.c128.im == 0.0;
    default: return v.u64 == 0;
  }
}

// Float to integer conversion saturates; NaN becomes 0.
template <class I>
I saturate(double v) {
  if (std::isnan(v)) return 0;
  if (v <= static_cast<double>(std::numeric_limits<I>::min())) return std::numeric_limits<I>::min();
  if (v >= static_cast<double>(std::numeric_limits<I>::max())) return std::numeric_limits<I>::max();
  return static_cast<I>(v);
}

template <class T>
T to_real(const Slot& s, VT from) {
  switch (from) {
    case VT::i32: return static_cast<T>(s.i32);
    case VT::u32: return static_cast<T>(s.u32);
    case VT::i64: return static_cast<T>(s.i64);
    case VT::ptr: return static_cast<T>(s.u64);
    case VT::f32: return static_cast<T>(s.f32);
    case VT::f64: return static_cast<T>(s.f64);
    case VT::c64: return static_cast<T>(s.c64.re);
    case VT::c128: return static_cast<T>(s.c128.re);
    default: return T{};
  }
}

template <class I>
I to_int(const Slot& s, VT from) {
  switch (from) {
    case VT::f32: return saturate<I>(s.f32);
    case VT::f64: return saturate<I>(s.f64);
    case VT::c64: return saturate<I>(s.c64.re);
    case VT::c128: return saturate<I>(s.c128.re);
    case VT::i32: return static_cast<I>(s.i32);
    case VT::u32: return static_cast<I>(s.u32);
    default: return static_cast<I>(s.i64);
  }
}

void convert(Slot& s, VT from, VT to) {
  Slot r{};
  switch (to) {
    case VT::i32: r.i32 = to_int<std::int32_t>(s, from); break;
    case VT::u32: r.u32 = to_int<std::uint32_t>(s, from); break;
    case VT::i64: r.i64 = to_int<std::int64_t>(s, from); break;
    case VT::ptr: r.u64 = to_int<std::uint64_t>(s, from); break;
    case VT::f32: r.f32 = to_real<float>(s, from); break;
    case VT::f64: r.f64 = to_real<double>(s, from); break;
    case VT::c64:
      if (from == VT::c128) {
        r.c64 = C64{static_cast<float>(s.c128.re), static_cast<float>(s.c128.im)};
      } else {
        r.c64 = C64{to_real<float>(s, from), 0.0f};
      }
      break;
    case VT::c128:
      if (from == VT::c64) {
        r.c128 = C128{s.c64.re, s.c64.im};
      } else {
        r.c128 = C128{to_real<double>(s, from), 0.0};
      }
      break;
    default: break;
  }
  s = r;
}

template <class T>
T abs_int(T v) {
  if constexpr (std::is_signed_v<T>) {
    using U = std::make_unsigned_t<T>;
    return v < 0 ? static_cast<T>(U{0} - static_cast<U>(v)) : v;
  }
  return v;
}

template <class T>
T real_math(BuiltinFn fn, T x) {
  switch (fn) {
    case BuiltinFn::sqrt: return std::sqrt(x);
    case BuiltinFn::exp: return std::exp(x);
    case BuiltinFn::log: return std::log(x);
    case BuiltinFn::sin: return std::sin(x);
    case BuiltinFn::cos: return std::cos(x);
    case BuiltinFn::fabs:
    case BuiltinFn::abs: return std::fabs(x);
    case BuiltinFn::floor: return std::floor(x);
    case BuiltinFn::ceil: return std::ceil(x);
    default: return x;
  }
}

template <class C, class T>
void complex_math(BuiltinFn fn, C& out_c, T& out_r, bool& real_result, C x) {
  std::complex<T> z(x.re, x.im);
  real_result = false;
  switch (fn) {
    case BuiltinFn::sqrt: z = std::sqrt(z); break;
    case BuiltinFn::exp: z = std::exp(z); break;
    case BuiltinFn::log: z = std::log(z); break;
    case BuiltinFn::sin: z = std::sin(z); break;
    case BuiltinFn::cos: z = std::cos(z); break;
    case BuiltinFn::conj: z = std::complex<T>(x.re, -x.im); break;
    case BuiltinFn::abs:
    case BuiltinFn::cabs:
      real_result = true;
      out_r = std::hypot(x.re, x.im);
      return;
    case BuiltinFn::creal:
      real_result = true;
      out_r = x.re;
      return;
    case BuiltinFn::cimag:
      real_result = true;
      out_r = x.im;
      return;
    default: break;
  }
  out_c = C{z.real(), z.imag()};
}

void math(VT t, BuiltinFn fn, Slot& v) {
  switch (t) {
    case VT::i32: v.i32 = abs_int(v.i32); break;
    case VT::u32: break;
    case VT::i64: v.i64 = abs_int(v.i64); break;
    case VT::f32: v.f32 = real_math(fn, v.f32); break;
    case VT::f64: v.f64 = real_math(fn, v.f64); break;
    case VT::c64: {
      C64 c{};
      float r = 0;
      bool real;
      complex_math<C64, float>(fn, c, r, real, v.c64);
      v = Slot{};
      if (real) {
        v.f32 = r;
      } else {
        v.c64 = c;
      }
      break;
    }
    case VT::c128: {
      C128 c{};
      double r = 0;
      bool real;
      complex_math<C128, double>(fn, c, r, real, v.c128);
      v = Slot{};
      if (real) {
        v.f64 = r;
      } else {
        v.c128 = c;
      }
      break;
    }
    default: break;
  }
}

template <class T>
T real_math2(BuiltinFn fn, T a, T b) {
  switch (fn) {
    case BuiltinFn::pow:
      if constexpr (std::is_floating_point_v<T>) return std::pow(a, b);
      return a;
    case BuiltinFn::fmin:
      if constexpr (std::is_floating_point_v<T>) return std::fmin(a, b);
      return a;
    case BuiltinFn::fmax:
      if constexpr (std::is_floating_point_v<T>) return std::fmax(a, b);
      return a;
    case BuiltinFn::min: return b < a ? b : a;
    case BuiltinFn::max: return a < b ? b : a;
    default: return a;
  }
}

void math2(VT t, BuiltinFn fn, Slot& a, const Slot& b) {
  switch (t) {
    case VT::i32: a.i32 = real_math2(fn, a.i32, b.i32); break;
    case VT::u32: a.u32 = real_math2(fn, a.u32, b.u32); break;
    case VT::i64: a.i64 = real_math2(fn, a.i64, b.i64); break;
    case VT::f32: a.f32 = real_math2(fn, a.f32, b.f32); break;
    case VT::f64: a.f64 = real_math2(fn, a.f64, b.f64); break;
    default: break;
  }
}

void negate(VT t, Slot& v) {
  switch (t) {
    case VT::i32: v.i32 = static_cast<std::int32_t>(0u - v.u32); break;
    case VT::u32: v.u32 = 0u - v.u32; break;
    case VT::i64: v.i64 = static_cast<std::int64_t>(std::uint64_t{0} - v.u64); break;
    case VT::f32: v.f32 = -v.f32; break;
    case VT::f64: v.f64 = -v.f64; break;
    case VT::c64: v.c64 = C64{-v.c64.re, -v.c64.im}; break;
    case VT::c128: v.c128 = C128{-v.c128.re, -v.c128.im}; break;
    default: break;
  }
}

// --- threads and blocks -------------------------------------------------------

constexpr std::size_t max_call_depth = 512;
constexpr std::size_t max_stack_slots = std::size_t{1} << 16;

struct Frame {
  std::int32_t ret_pc;
  std::uint32_t fp;
};

enum class Status : std::uint8_t { ready, waiting, finished };

struct Thread {
  std::vector<Slot> stack;
  std::vector<Frame> frames;
  std::uint32_t sp = 0;
  std::uint32_t fp = 0;
  std::int32_t pc = 0;
  std::uint32_t tid[3] = {0, 0, 0};
  Status status = Status::ready;
  std::int32_t barrier_pc = -1;
};

struct Scratch {
  std::vector<Thread> threads;
  std::vector<std::byte> shared;
  std::vector<std::uint32_t> order;
};

class BlockRunner {
 public:
  BlockRunner(const LaunchPlan& plan, const GlobalMemory& g, Scratch& scratch)
      : plan_(plan), prog_(*plan.program), g_(g), scratch_(scratch) {
    const FunctionCode& fn = prog_.functions[plan.entry->function];
    entry_pc_ = fn.entry_pc;
    frame_slots_ = static_cast<std::uint32_t>(fn.frame_slots);
    initial_stack_ = std::max<std::size_t>(64, static_cast<std::size_t>(fn.frame_slots + fn.max_stack) + 8);
    shared_bytes_ = plan.entry->static_shared_bytes + plan.dynamic_shared;
  }

  void run(std::uint64_t linear_block) {
    const Dim3 grid = plan_.grid;
    const Dim3 block = plan_.block;
    block_idx_[0] = static_cast<std::uint32_t>(linear_block % grid.x);
    block_idx_[1] = static_cast<std::uint32_t>((linear_block / grid.x) % grid.y);
    block_idx_[2] = static_cast<std::uint32_t>(linear_block / (std::uint64_t{grid.x} * grid.y));

    const std::uint32_t n = static_cast<std::uint32_t>(block.volume());
    auto& threads = scratch_.threads;
    if (threads.size() < n) threads.resize(n);
    scratch_.shared.assign(shared_bytes_, std::byte{0});
    Memory mem(g_, scratch_.shared.data(), shared_bytes_);

    for (std::uint32_t k = 0; k < n; ++k) {
      Thread& t = threads[k];
      if (t.stack.size() < initial_stack_) t.stack.resize(initial_stack_);
      t.frames.clear();
      std::copy(plan_.args.begin(), plan_.args.end(), t.stack.begin());
      t.sp = frame_slots_;
      t.fp = 0;
      t.pc = entry_pc_;
      t.tid[0] = k % block.x;
      t.tid[1] = (k / block.x) % block.y;
      t.tid[2] = k / (block.x * block.y);
      t.status = Status::ready;
      t.barrier_pc = -1;
      if (plan_.debug) {
        for (int a = 0; a < 3; ++a) {
          std::uint32_t bd = a == 0 ? block.x : a == 1 ? block.y : block.z;
          std::uint32_t gd = a == 0 ? grid.x : a == 1 ? grid.y : grid.z;
          if (t.tid[a] >= bd || block_idx_[a] >= gd) trap("interpreter invariant violated: builtin index out of range");
        }
      }
    }

    SplitMix rng{plan_.seed ^ (linear_block * 0xd1b54a32d192ed03ULL)};
    auto& order = scratch_.order;
    order.resize(n);
    for (std::uint32_t k = 0; k < n; ++k) order[k] = k;

    for (;;) {
      if (plan_.mode == ScheduleMode::shuffled) std::shuffle(order.begin(), order.end(), rng);
      for (std::uint32_t k : order) {
        Thread& t = threads[k];
        if (t.status != Status::ready) continue;
        try {
          interpret(t, mem);
        } catch (const LaunchError& e) {
          rethrow_with_context(e, t);
        }
      }
      std::uint32_t finished = 0;
      std::uint32_t waiting = 0;
      std::int32_t site = -1;
      bool mixed_sites = false;
      for (std::uint32_t k = 0; k < n; ++k) {
        const Thread& t = threads[k];
        if (t.status == Status::finished) {
          ++finished;
        } else {
          ++waiting;
          if (site < 0) {
            site = t.barrier_pc;
          } else if (t.barrier_pc != site) {
            mixed_sites = true;
          }
        }
      }
      if (waiting == 0) return;
      if (finished > 0) {
        throw BarrierDivergence(std::to_string(waiting) + " of " + std::to_string(n) +
                                " threads wait at __syncthreads() while " + std::to_string(finished) +
                                " have exited" + where());
      }
      if (mixed_sites) {
        throw BarrierDivergence("threads wait at different __syncthreads() sites" + where());
      }
      for (std::uint32_t k = 0; k < n; ++k) threads[k].status = Status::ready;
    }
  }

 private:
  std::string coords(const std::uint32_t v[3]) const {
    return "(" + std::to_string(v[0]) + "," + std::to_string(v[1]) + "," + std::to_string(v[2]) + ")";
  }

  std::string where() const { return " in kernel '" + plan_.entry->name + "', block " + coords(block_idx_); }

  [[noreturn]] void rethrow_with_context(const LaunchError& e, const Thread& t) const {
    std::string msg = std::string(e.what()) + where() + ", thread " + coords(t.tid);
    switch (e.kind()) {
      case ErrorKind::out_of_bounds: throw OutOfBounds(static_cast<const OutOfBounds&>(e).address(), msg);
      case ErrorKind::misaligned_access:
        throw MisalignedAccess(static_cast<const MisalignedAccess&>(e).address(), msg);
      case ErrorKind::barrier_divergence: throw BarrierDivergence(msg);
      default: throw Trap(msg);
    }
  }

  void interpret(Thread& t, Memory& mem) {
    const Instr* code = prog_.code.data();
    const Slot* consts = prog_.constants.data();
    Slot* st = t.stack.data();
    std::uint32_t sp = t.sp;
    std::uint32_t fp = t.fp;
    std::int32_t pc = t.pc;
    std::uint32_t builtins[12] = {
        t.tid[0],        t.tid[1],        t.tid[2],        block_idx_[0],   block_idx_[1],   block_idx_[2],
        plan_.block.x,   plan_.block.y,   plan_.block.z,   plan_.grid.x,    plan_.grid.y,    plan_.grid.z,
    };
    const std::vector<std::int64_t>& shared_offsets = plan_.entry->shared_offsets;

    for (;;) {
      const Instr& in = code[pc++];
      switch (in.op) {
        case Op::push_const:
          st[sp++] = consts[in.a];
          break;
        case Op::load_local:
          st[sp++] = st[fp + in.a];
          break;
        case Op::store_local:
          st[fp + in.a] = st[sp - 1];
          if (!in.flag) --sp;
          break;
        case Op::zero_local:
          st[fp + in.a] = Slot{};
          break;
        case Op::load_builtin:
          st[sp] = Slot{};
          st[sp++].u32 = builtins[in.a];
          break;
        case Op::shared_addr:
          st[sp++].u64 = shared_window + static_cast<std::uint64_t>(shared_offsets[in.a]);
          break;
        case Op::load_mem:
          st[sp - 1] = load(mem, in.ty, st[sp - 1].u64);
          break;
        case Op::store_mem: {
          Slot v = st[sp - 1];
          store(mem, in.ty, st[sp - 2].u64, v);
          sp -= 2;
          if (in.flag) st[sp++] = v;
          break;
        }
        case Op::atomic_add: {
          Slot old = atomic_add(mem, in.ty, st[sp - 2].u64, st[sp - 1]);
          --sp;
          st[sp - 1] = old;
          break;
        }
        case Op::bin:
          bin(in.ty, static_cast<BinOp>(in.a), st[sp - 2], st[sp - 1]);
          --sp;
          break;
        case Op::cmp: {
          std::int32_t r = cmp(in.ty, static_cast<BinOp>(in.a), st[sp - 2], st[sp - 1]);
          --sp;
          st[sp - 1] = Slot{};
          st[sp - 1].i32 = r;
          break;
        }
        case Op::neg:
          negate(in.ty, st[sp - 1]);
          break;
        case Op::bit_not:
          if (in.ty == VT::i64) {
            st[sp - 1].i64 = ~st[sp - 1].i64;
          } else {
            st[sp - 1].u32 = ~st[sp - 1].u32;
          }
          break;
        case Op::nonzero: {
          std::int32_t r = !is_zero(in.ty, st[sp - 1]);
          st[sp - 1] = Slot{};
          st[sp - 1].i32 = r;
          break;
        }
        case Op::is_zero: {
          std::int32_t r = is_zero(in.ty, st[sp - 1]);
          st[sp - 1] = Slot{};
          st[sp - 1].i32 = r;
          break;
        }
        case Op::convert:
          convert(st[sp - 1], in.ty, in.ty2);
          break;
        case Op::ptr_add:
          st[sp - 2].u64 += static_cast<std::uint64_t>(st[sp - 1].i64) * static_cast<std::uint64_t>(in.a);
          --sp;
          break;
        case Op::ptr_diff:
          st[sp - 2].i64 = static_cast<std::int64_t>(st[sp - 2].u64 - st[sp - 1].u64) / in.a;
          --sp;
          break;
        case Op::make_complex:
          if (in.ty == VT::c64) {
            st[sp - 2].c64 = C64{st[sp - 2].f32, st[sp - 1].f32};
          } else {
            st[sp - 2].c128 = C128{st[sp - 2].f64, st[sp - 1].f64};
          }
          --sp;
          break;
        case Op::math:
          math(in.ty, static_cast<BuiltinFn>(in.a), st[sp - 1]);
          break;
        case Op::math2:
          math2(in.ty, static_cast<BuiltinFn>(in.a), st[sp - 2], st[sp - 1]);
          --sp;
          break;
        case Op::jump:
          pc = in.a;
          break;
        case Op::jump_if_false:
          if (st[--sp].i32 == 0) pc = in.a;
          break;
        case Op::jump_if_true:
          if (st[--sp].i32 != 0) pc = in.a;
          break;
        case Op::call: {
          const FunctionCode& callee = prog_.functions[in.a];
          std::uint32_t new_fp = sp - static_cast<std::uint32_t>(in.b);
          std::size_t need = static_cast<std::size_t>(new_fp) + callee.frame_slots + callee.max_stack + 8;
          if (t.frames.size() >= max_call_depth || need > max_stack_slots) trap(prog_.messages[1]);
          if (need > t.stack.size()) {
            t.stack.resize(std::min(max_stack_slots, need * 2));
            st = t.stack.data();
          }
          t.frames.push_back(Frame{pc, fp});
          fp = new_fp;
          sp = fp + static_cast<std::uint32_t>(callee.frame_slots);
          pc = callee.entry_pc;
          break;
        }
        case Op::ret: {
          Slot v = st[sp - 1];
          Frame f = t.frames.back();
          t.frames.pop_back();
          sp = fp;
          st[sp++] = v;
          fp = f.fp;
          pc = f.ret_pc;
          break;
        }
        case Op::ret_void: {
          if (t.frames.empty()) {
            t.status = Status::finished;
            return;
          }
          Frame f = t.frames.back();
          t.frames.pop_back();
          sp = fp;
          fp = f.fp;
          pc = f.ret_pc;
          break;
        }
        case Op::barrier:
          t.sp = sp;
          t.fp = fp;
          t.pc = pc;
          t.barrier_pc = pc - 1;
          t.status = Status::waiting;
          return;
        case Op::pop:
          --sp;
          break;
        case Op::dup:
          st[sp] = st[sp - 1];
          ++sp;
          break;
        case Op::swap:
          std::swap(st[sp - 1], st[sp - 2]);
          break;
        case Op::trap:
          trap(prog_.messages[in.a]);
      }
    }
  }

  const LaunchPlan& plan_;
  const Program& prog_;
  const GlobalMemory& g_;
  Scratch& scratch_;
  std::int32_t entry_pc_ = 0;
  std::uint32_t frame_slots_ = 0;
  std::size_t initial_stack_ = 64;
  std::uint64_t shared_bytes_ = 0;
  std::uint32_t block_idx_[3] = {0, 0, 0};
};

}  // namespace

std::uint64_t execute(const LaunchPlan& plan, const GlobalMemory& memory, WorkerPool& pool) {
  const std::uint64_t total = plan.grid.volume();
  std::vector<std::uint64_t> order(total);
  for (std::uint64_t b = 0; b < total; ++b) order[b] = b;
  if (plan.mode == ScheduleMode::shuffled) {
    SplitMix rng{plan.seed};
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::exception_ptr error;
  std::uint64_t error_block = std::numeric_limits<std::uint64_t>::max();

  unsigned workers = total > 1 ? pool.size() : 1;
  std::vector<Scratch> scratch(workers);
  auto job = [&](unsigned w) {
    if (w >= workers) return;
    BlockRunner runner(plan, memory, scratch[w]);
    for (;;) {
      std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= total || failed.load(std::memory_order_relaxed)) return;
      std::uint64_t b = order[i];
      try {
        runner.run(b);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (b < error_block) {
          error_block = b;
          error = std::current_exception();
        }
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };
  if (workers > 1) {
    pool.run(job);
  } else {
    job(0);
  }
  if (error) std::rethrow_exception(error);
  return total;
}

}  // namespace simt::detail
