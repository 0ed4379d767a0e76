#ifndef SIMT_SRC_DEVICE_BYTECODE_HPP
#define SIMT_SRC_DEVICE_BYTECODE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "simt/kernel_lang.hpp"

// Stack-machine code executed by the SIMT interpreter. Lowered from a typed
// KernelModule; every instruction carries the value kind it operates on.

namespace simt::detail {

/// Runtime value kinds. Order matches ArgTag.
enum class VT : std::uint8_t { i32, u32, i64, f32, f64, c64, c128, ptr, void_ };

VT vt_of(Type t) noexcept;
inline VT vt_of(Scalar s) noexcept { return vt_of(Type::of(s)); }

struct C64 {
  float re, im;
};
struct C128 {
  double re, im;
};

union Slot {
  std::int32_t i32;
  std::uint32_t u32;
  std::int64_t i64;
  std::uint64_t u64;
  float f32;
  double f64;
  C64 c64;
  C128 c128;
};
static_assert(sizeof(Slot) == 16);

enum class Op : std::uint8_t {
  push_const,    // a = constant index
  load_local,    // a = slot
  store_local,   // a = slot, flag = keep value on stack
  load_builtin,  // a = var * 3 + axis
  shared_addr,   // a = shared decl id
  load_mem,      // ty; pops address
  store_mem,     // ty; pops value then address, flag = keep value
  atomic_add,    // ty; pops value then address, pushes old value
  bin,           // ty = operand kind, a = BinOp (arithmetic, bitwise, shifts)
  cmp,           // ty = operand kind, a = BinOp (comparison), pushes i32
  neg,           // ty
  bit_not,       // ty
  nonzero,       // ty; pushes i32 (value != 0)
  is_zero,       // ty; pushes i32 (value == 0)
  convert,       // ty -> ty2
  ptr_add,       // a = element size; pops i64 offset then pointer
  ptr_diff,      // a = element size; pops two pointers, pushes i64
  make_complex,  // ty = complex kind; pops im then re (real parts)
  math,          // ty = operand kind, a = BuiltinFn
  math2,         // ty = operand kind, a = BuiltinFn (two operands)
  jump,          // a = target
  jump_if_false, // pops i32
  jump_if_true,  // pops i32
  call,          // a = function index, b = argument count
  ret,           // pops return value
  ret_void,
  barrier,
  pop,
  dup,
  swap,
  zero_local,    // a = slot
  trap,          // a = message index
};

struct Instr {
  Op op;
  VT ty = VT::void_;
  VT ty2 = VT::void_;
  std::uint8_t flag = 0;
  std::int32_t a = 0;
  std::int32_t b = 0;
};

struct FunctionCode {
  std::string name;
  bool is_global = false;
  std::int32_t entry_pc = 0;
  std::int32_t num_params = 0;
  std::int32_t frame_slots = 0;  // params + locals + temporaries
  std::int32_t max_stack = 0;    // operand stack high-water mark
  std::vector<VT> params;
};

struct EntryInfo {
  std::string name;
  std::int32_t function = -1;
  lang::ParamSignature signature;
  // Byte offset of each shared declaration within the block's shared
  // memory; -1 for declarations not reachable from this entry.
  std::vector<std::int64_t> shared_offsets;
  std::uint32_t static_shared_bytes = 0;
};

struct Program {
  std::vector<Instr> code;
  std::vector<Slot> constants;
  std::vector<std::string> messages;
  std::vector<FunctionCode> functions;
  std::vector<EntryInfo> entries;

  const EntryInfo* find_entry(std::string_view name) const;
};

/// Compiles a typed module to interpreter code.
Program lower(const lang::KernelModule& module);

}  // namespace simt::detail

#endif  // SIMT_SRC_DEVICE_BYTECODE_HPP
