#include "source_module/serialize.hpp"

#include <openssl/sha.h>

#include <bit>
#include <cstring>

namespace simt::detail {

using namespace lang;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) {
    out += digits[c >> 4];
    out += digits[c & 15];
  }
  return out;
}

namespace {

class Writer {
 public:
  void u8(std::uint64_t v) { out_ += static_cast<char>(v & 0xff); }
  void u16(std::uint64_t v) { le(v, 2); }
  void u32(std::uint64_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i32(std::int64_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(s.size());
    out_ += s;
  }
  void type(Type t) {
    u8(static_cast<std::uint8_t>(t.scalar));
    u8(t.pointer);
  }
  void pos(SourcePos p) {
    i32(p.line);
    i32(p.column);
  }

  std::string& bytes() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_ += static_cast<char>((v >> (8 * i)) & 0xff);
  }

  std::string out_;
};

[[noreturn]] void corrupt(const std::string& why) { throw FormatError("corrupt module payload: " + why); }

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint64_t u8() { return le(1); }
  std::uint64_t u16() { return le(2); }
  std::uint64_t u32() { return le(4); }
  std::uint64_t u64() { return le(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(le(4))); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  double f64() { return std::bit_cast<double>(le(8)); }
  bool flag() {
    std::uint64_t v = u8();
    if (v > 1) corrupt("bad flag");
    return v == 1;
  }
  template <class E>
  E enumeration(E last) {
    std::uint64_t v = u8();
    if (v > static_cast<std::uint64_t>(last)) corrupt("enumerator out of range");
    return static_cast<E>(v);
  }
  std::string str() {
    std::uint64_t n = u32();
    need(n);
    std::string s(in_.substr(at_, n));
    at_ += n;
    return s;
  }
  Type type() {
    Type t;
    t.scalar = enumeration(Scalar::c128);
    t.pointer = flag();
    return t;
  }
  SourcePos pos() {
    SourcePos p;
    p.line = i32();
    p.column = i32();
    return p;
  }
  /// A count of elements that each take at least `min_bytes` bytes.
  std::size_t count(std::size_t min_bytes) {
    std::uint64_t n = u32();
    if (n * min_bytes > in_.size() - at_) corrupt("count exceeds payload");
    return static_cast<std::size_t>(n);
  }
  bool done() const { return at_ == in_.size(); }

 private:
  void need(std::uint64_t n) {
    if (n > in_.size() - at_) corrupt("truncated");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{static_cast<unsigned char>(in_[at_ + i])} << (8 * i);
    at_ += n;
    return v;
  }

  std::string_view in_;
  std::size_t at_ = 0;
};

void write_payload(Writer& w, const KernelModule& m) {
  w.str(m.origin);
  w.u8(m.typed);

  w.u32(m.exprs.size());
  for (const Expr& e : m.exprs) {
    w.u8(static_cast<std::uint8_t>(e.kind));
    w.pos(e.pos);
    w.u8(static_cast<std::uint8_t>(e.bin));
    w.u8(static_cast<std::uint8_t>(e.un));
    w.u8(e.compound);
    w.u64(e.int_value);
    w.f64(e.float_value);
    w.u8(static_cast<std::uint8_t>(e.literal));
    w.str(e.name);
    w.u8(static_cast<std::uint8_t>(e.var));
    w.u8(e.axis);
    w.type(e.cast_type);
    w.i32(e.lhs);
    w.i32(e.rhs);
    w.i32(e.third);
    w.u32(e.args.size());
    for (NodeId a : e.args) w.i32(a);
    w.type(e.type);
    w.type(e.operand_type);
    w.u8(static_cast<std::uint8_t>(e.ref));
    w.i32(e.ref_index);
  }

  w.u32(m.stmts.size());
  for (const Stmt& s : m.stmts) {
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.pos(s.pos);
    w.u32(s.children.size());
    for (NodeId c : s.children) w.i32(c);
    w.type(s.decl_type);
    w.u32(s.decls.size());
    for (const Declarator& d : s.decls) {
      w.str(d.name);
      w.pos(d.pos);
      w.type(d.type);
      w.i32(d.init);
      w.i32(d.slot);
    }
    w.i64(s.array_size);
    w.u8(s.dynamic_shared);
    w.i32(s.expr);
    w.i32(s.init);
    w.i32(s.step);
    w.i32(s.body);
    w.i32(s.else_body);
    w.i32(s.shared_id);
  }

  w.u32(m.functions.size());
  for (const Function& f : m.functions) {
    w.u8(f.is_global);
    w.type(f.return_type);
    w.str(f.name);
    w.u32(f.params.size());
    for (const Param& p : f.params) {
      w.str(p.name);
      w.type(p.type);
      w.pos(p.pos);
    }
    w.i32(f.body);
    w.pos(f.pos);
    w.i32(f.num_slots);
  }

  w.u32(m.shared.size());
  for (const SharedDecl& d : m.shared) {
    w.u8(static_cast<std::uint8_t>(d.element));
    w.i64(d.count);
    w.u8(d.dynamic);
    w.i32(d.function);
  }
}

void check_ref(NodeId id, std::size_t n, const char* what) {
  if (id != no_node && (id < 0 || static_cast<std::size_t>(id) >= n)) {
    corrupt(std::string("dangling ") + what + " reference");
  }
}

KernelModule read_payload(Reader& r) {
  KernelModule m;
  m.origin = r.str();
  m.typed = r.flag();

  m.exprs.resize(r.count(40));
  for (Expr& e : m.exprs) {
    e.kind = r.enumeration(ExprKind::post_dec);
    e.pos = r.pos();
    e.bin = r.enumeration(BinOp::log_or);
    e.un = r.enumeration(UnOp::bit_not);
    e.compound = r.flag();
    e.int_value = r.u64();
    e.float_value = r.f64();
    e.literal = r.enumeration(Scalar::c128);
    e.name = r.str();
    e.var = r.enumeration(BuiltinVar::grid_dim);
    e.axis = static_cast<std::uint8_t>(r.u8());
    if (e.axis > 2) corrupt("axis out of range");
    e.cast_type = r.type();
    e.lhs = r.i32();
    e.rhs = r.i32();
    e.third = r.i32();
    e.args.resize(r.count(4));
    for (NodeId& a : e.args) a = r.i32();
    e.type = r.type();
    e.operand_type = r.type();
    e.ref = r.enumeration(RefKind::builtin_fn);
    e.ref_index = r.i32();
  }

  m.stmts.resize(r.count(40));
  for (Stmt& s : m.stmts) {
    s.kind = r.enumeration(StmtKind::empty);
    s.pos = r.pos();
    s.children.resize(r.count(4));
    for (NodeId& c : s.children) c = r.i32();
    s.decl_type = r.type();
    s.decls.resize(r.count(20));
    for (Declarator& d : s.decls) {
      d.name = r.str();
      d.pos = r.pos();
      d.type = r.type();
      d.init = r.i32();
      d.slot = r.i32();
    }
    s.array_size = r.i64();
    s.dynamic_shared = r.flag();
    s.expr = r.i32();
    s.init = r.i32();
    s.step = r.i32();
    s.body = r.i32();
    s.else_body = r.i32();
    s.shared_id = r.i32();
  }

  m.functions.resize(r.count(16));
  for (Function& f : m.functions) {
    f.is_global = r.flag();
    f.return_type = r.type();
    f.name = r.str();
    f.params.resize(r.count(14));
    for (Param& p : f.params) {
      p.name = r.str();
      p.type = r.type();
      p.pos = r.pos();
    }
    f.body = r.i32();
    f.pos = r.pos();
    f.num_slots = r.i32();
  }

  m.shared.resize(r.count(14));
  for (SharedDecl& d : m.shared) {
    d.element = r.enumeration(Scalar::c128);
    d.count = r.i64();
    d.dynamic = r.flag();
    d.function = r.i32();
  }

  const std::size_t ne = m.exprs.size();
  const std::size_t ns = m.stmts.size();
  const std::size_t nf = m.functions.size();
  for (const Expr& e : m.exprs) {
    check_ref(e.lhs, ne, "expression");
    check_ref(e.rhs, ne, "expression");
    check_ref(e.third, ne, "expression");
    for (NodeId a : e.args) check_ref(a, ne, "expression");
    if (e.ref == RefKind::function) check_ref(e.ref_index, nf, "function");
    if (e.ref == RefKind::shared) check_ref(e.ref_index, m.shared.size(), "shared");
  }
  for (const Stmt& s : m.stmts) {
    for (NodeId c : s.children) check_ref(c, ns, "statement");
    for (const Declarator& d : s.decls) check_ref(d.init, ne, "expression");
    check_ref(s.expr, ne, "expression");
    check_ref(s.init, ns, "statement");
    check_ref(s.step, ne, "expression");
    check_ref(s.body, ns, "statement");
    check_ref(s.else_body, ns, "statement");
    check_ref(s.shared_id, m.shared.size(), "shared");
  }
  for (const Function& f : m.functions) {
    check_ref(f.body, ns, "statement");
    if (f.num_slots < static_cast<std::int32_t>(f.params.size())) corrupt("frame smaller than parameter list");
  }
  for (const SharedDecl& d : m.shared) check_ref(d.function, nf, "function");
  return m;
}

}  // namespace

std::string serialize_module(const KernelModule& module) {
  Writer payload;
  write_payload(payload, module);

  Writer w;
  w.bytes() = "SMOD";
  w.u16(smod_version);
  w.bytes() += payload.bytes();
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(payload.bytes().data()), payload.bytes().size(), digest);
  w.bytes().append(reinterpret_cast<const char*>(digest), sizeof digest);
  return std::move(w.bytes());
}

KernelModule deserialize_module(std::string_view bytes) {
  if (bytes.size() < 6 + SHA256_DIGEST_LENGTH || bytes.substr(0, 4) != "SMOD") {
    throw FormatError("not a module cache entry (bad magic)");
  }
  unsigned version = static_cast<unsigned char>(bytes[4]) | (static_cast<unsigned char>(bytes[5]) << 8);
  if (version != smod_version) throw FormatError("unsupported module format version " + std::to_string(version));

  std::string_view payload = bytes.substr(6, bytes.size() - 6 - SHA256_DIGEST_LENGTH);
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(payload.data()), payload.size(), digest);
  if (std::memcmp(digest, bytes.data() + bytes.size() - SHA256_DIGEST_LENGTH, SHA256_DIGEST_LENGTH) != 0) {
    throw FormatError("module payload checksum mismatch");
  }

  Reader r(payload);
  KernelModule m = read_payload(r);
  if (!r.done()) corrupt("trailing bytes");
  return m;
}

}  // namespace simt::detail
