#include <gtest/gtest.h>

#include <complex>
#include <fstream>
#include <sstream>

#include "simt/source_module.hpp"
#include "support.hpp"

using namespace simt;
using test::env_context;
using test::TempDir;
namespace fs = std::filesystem;

namespace {

const std::string doublify_src =
    "__global__ void doublify(float *a)\n{\n  int idx = threadIdx.x + threadIdx.y*4;\n  a[idx] *= 2;\n}\n";

ModuleOptions in_dir(const TempDir& d) {
  ModuleOptions o;
  o.cache_dir = d.path();
  return o;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

std::vector<float> run_doublify(Context& ctx, const CompiledModule& m, const std::vector<float>& in) {
  KernelHandle k = get_function(m, "doublify");
  DeviceAllocation a = mem_alloc(ctx, 64);
  memcpy_htod(ctx, a, in.data(), 64);
  TaggedValue args[] = {a.ptr()};
  k(Dim3(1, 1), Dim3(4, 4, 1), args);
  std::vector<float> out(16);
  memcpy_dtoh(ctx, out.data(), a, 64);
  return out;
}

}  // namespace

TEST(CacheKey, MatchesDocumentedPreimage) {
  // sha256(wrapped text, NUL, "no_extern_c=N", NUL, format version), computed
  // independently with a stock SHA-256 tool.
  ModuleOptions o;
  EXPECT_EQ(cache_key(doublify_src, o), "fc94681025631fcf3cd8c66a146f58b175a9d869d3a63d18451dcd0ee69c90f3");
  o.no_extern_c = true;
  EXPECT_EQ(cache_key(doublify_src, o), "80c32692a3056b750477249580ed931c2aa035ce27fedb11264feaa6693aa9ca");
  EXPECT_EQ(cache_format_version(), "simt-kernel-lang/1;smod/1");
}

TEST(CacheKey, OptionsAndSourceChangeKey) {
  ModuleOptions a, b;
  b.no_extern_c = true;
  EXPECT_NE(cache_key(doublify_src, a), cache_key(doublify_src, b));
  EXPECT_NE(cache_key(doublify_src, a), cache_key(doublify_src + " ", a));
  // Diagnostics labels and cache location do not affect the compiled result.
  ModuleOptions c;
  c.origin = "elsewhere";
  c.cache_dir = "/nonexistent";
  EXPECT_EQ(cache_key(doublify_src, a), cache_key(doublify_src, c));
}

TEST(SourceModule, MissThenHitWithIdenticalBehavior) {
  TempDir dir;
  Context ctx = env_context();
  std::vector<float> in = test::random_f32(4, 16);
  CompiledModule first = source_module(ctx, doublify_src, in_dir(dir));
  EXPECT_EQ(first.cache_status(), CacheStatus::miss);
  CompiledModule second = source_module(ctx, doublify_src, in_dir(dir));
  EXPECT_EQ(second.cache_status(), CacheStatus::hit);
  EXPECT_EQ(first.digest(), second.digest());
  EXPECT_EQ(run_doublify(ctx, first, in), run_doublify(ctx, second, in));
  CacheStats s = cache_stats(ctx);
  EXPECT_EQ(s.hits, 1u);
  EXPECT_EQ(s.misses, 1u);
  EXPECT_EQ(s.compiles, 1u);
}

TEST(SourceModule, CacheCountersFromFreshDirectory) {
  TempDir dir;
  EXPECT_EQ(cache_dir_stats(dir.path()).hits, 0u);
  EXPECT_EQ(cache_dir_stats(dir.path()).misses, 0u);
  Context ctx = env_context();
  source_module(ctx, doublify_src, in_dir(dir));
  CacheDirStats one = cache_dir_stats(dir.path());
  EXPECT_EQ(one.hits, 0u);
  EXPECT_EQ(one.misses, 1u);
  EXPECT_EQ(one.entries, 1u);
  source_module(ctx, doublify_src, in_dir(dir));
  CacheDirStats two = cache_dir_stats(dir.path());
  EXPECT_EQ(two.hits, 1u);
  EXPECT_EQ(two.misses, 1u);
}

TEST(SourceModule, EntryFileFormat) {
  TempDir dir;
  Context ctx = env_context();
  CompiledModule m = source_module(ctx, doublify_src, in_dir(dir));
  std::string bytes = read_bytes(dir.path() / m.digest());
  ASSERT_GE(bytes.size(), 6u);
  EXPECT_EQ(bytes.substr(0, 4), "SMOD");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]) | (static_cast<unsigned char>(bytes[5]) << 8), 1);
}

TEST(SourceModule, CorruptEntryWarnsRecompilesAndOverwrites) {
  TempDir dir;
  Context ctx = env_context();
  std::vector<float> in = test::random_f32(8, 16);
  CompiledModule good = source_module(ctx, doublify_src, in_dir(dir));
  fs::path entry = dir.path() / good.digest();
  const std::string original = read_bytes(entry);

  for (std::string bad : {std::string("garbage"), std::string(), original.substr(0, original.size() / 2),
                          std::string("SMOD\x07\x00", 6) + original.substr(6)}) {
    write_bytes(entry, bad);
    testing::internal::CaptureStderr();
    CompiledModule again = source_module(ctx, doublify_src, in_dir(dir));
    std::string warning = testing::internal::GetCapturedStderr();
    EXPECT_EQ(again.cache_status(), CacheStatus::miss);
    EXPECT_NE(warning.find("warning"), std::string::npos);
    EXPECT_EQ(read_bytes(entry), original);
    EXPECT_EQ(run_doublify(ctx, again, in), run_doublify(ctx, good, in));
  }
  // One flipped payload byte is caught by the checksum.
  std::string flipped = original;
  flipped[original.size() / 2] ^= 0x40;
  write_bytes(entry, flipped);
  testing::internal::CaptureStderr();
  EXPECT_EQ(source_module(ctx, doublify_src, in_dir(dir)).cache_status(), CacheStatus::miss);
  testing::internal::GetCapturedStderr();
}

TEST(SourceModule, UseCacheFalseBypasses) {
  TempDir dir;
  Context ctx = env_context();
  ModuleOptions o = in_dir(dir);
  o.use_cache = false;
  CompiledModule m = source_module(ctx, doublify_src, o);
  EXPECT_EQ(m.cache_status(), CacheStatus::bypassed);
  EXPECT_EQ(cache_dir_stats(dir.path()).entries, 0u);
  EXPECT_EQ(cache_stats(ctx).hits + cache_stats(ctx).misses, 0u);
}

TEST(SourceModule, NoExternCCompilesEitherWay) {
  TempDir dir;
  Context ctx = env_context();
  ModuleOptions o = in_dir(dir);
  o.no_extern_c = true;
  CompiledModule a = source_module(ctx, doublify_src, o);
  CompiledModule b = source_module(ctx, doublify_src, in_dir(dir));
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_EQ(a.entry_names(), b.entry_names());
  EXPECT_EQ(cache_dir_stats(dir.path()).entries, 2u);
}

TEST(SourceModule, CompileErrorsKeepCallerLineNumbers) {
  Context ctx = env_context();
  const std::string bad = "__global__ void f()\n{\n  int x = ;\n}\n";
  for (bool nec : {false, true}) {
    for (bool cache : {false, true}) {
      TempDir dir;
      ModuleOptions o = in_dir(dir);
      o.no_extern_c = nec;
      o.use_cache = cache;
      o.origin = "k.cu";
      try {
        source_module(ctx, bad, o);
        FAIL();
      } catch (const CompileError& e) {
        EXPECT_EQ(e.line(), 3);
        EXPECT_EQ(e.column(), 11);
        EXPECT_EQ(std::string(e.what()).rfind("k.cu:3:11: ", 0), 0u) << e.what();
      }
      EXPECT_EQ(cache_dir_stats(dir.path()).entries, 0u);
    }
  }
}

TEST(SourceModule, CacheTransparencyOverCorpus) {
  Context ctx = env_context();
  for (const auto& f : fs::directory_iterator(CORPUS_DIR)) {
    TempDir dir;
    std::string src = read_bytes(f.path());
    CompiledModule miss = source_module(ctx, src, in_dir(dir));
    CompiledModule hit = source_module(ctx, src, in_dir(dir));
    ASSERT_EQ(hit.cache_status(), CacheStatus::hit) << f.path();
    EXPECT_TRUE(lang::structurally_equal(miss.module(), hit.module())) << f.path();
    EXPECT_TRUE(lang::annotations_equal(miss.module(), hit.module())) << f.path();
    EXPECT_EQ(miss.entry_names(), hit.entry_names());
    EXPECT_EQ(miss.module().entries(), hit.module().entries());
  }
}

TEST(SourceModule, ModuleOutlivingContextRaisesStateError) {
  std::optional<KernelHandle> k;
  {
    Context ctx = env_context();
    ModuleOptions o;
    o.use_cache = false;
    k = get_function(source_module(ctx, doublify_src, o), "doublify");
  }
  EXPECT_THROW((*k)(Dim3(1), Dim3(1), std::span<const TaggedValue>{}), StateError);
}

TEST(GetFunction, Lookup) {
  Context ctx = env_context();
  ModuleOptions o;
  o.use_cache = false;
  CompiledModule m = source_module(ctx, "__device__ float h(float x){ return x; }\n" + doublify_src, o);
  KernelHandle k = get_function(m, "doublify");
  EXPECT_EQ(k.name(), "doublify");
  EXPECT_EQ(k.signature().types(), std::vector<Type>{Type::pointer_to(Scalar::f32)});
  EXPECT_THROW(get_function(m, "missing"), NotFound);
  EXPECT_THROW(get_function(m, "h"), NotFound);
}

TEST(Call, TagMismatchNamesPosition) {
  Context ctx = env_context();
  ModuleOptions o;
  o.use_cache = false;
  KernelHandle k = get_function(source_module(ctx, doublify_src, o), "doublify");
  TaggedValue args[] = {2.0};
  try {
    k(Dim3(1), Dim3(4, 4), args);
    FAIL();
  } catch (const ArgumentError& e) {
    std::string w = e.what();
    EXPECT_NE(w.find("argument 0"), std::string::npos) << w;
    EXPECT_NE(w.find("Ptr"), std::string::npos) << w;
    EXPECT_NE(w.find("F64"), std::string::npos) << w;
  }
}

TEST(ArgFormat, Parse) {
  EXPECT_EQ(parse_arg_format("P"), std::vector<ArgTag>{ArgTag::ptr});
  EXPECT_EQ(parse_arg_format("Pif"), (std::vector<ArgTag>{ArgTag::ptr, ArgTag::i32, ArgTag::f32}));
  EXPECT_EQ(parse_arg_format("PiIqfdFD"), (std::vector<ArgTag>{ArgTag::ptr, ArgTag::i32, ArgTag::u32, ArgTag::i64,
                                                               ArgTag::f32, ArgTag::f64, ArgTag::c64, ArgTag::c128}));
  EXPECT_TRUE(parse_arg_format("").empty());
  try {
    parse_arg_format("Px");
    FAIL();
  } catch (const FormatError& e) {
    std::string w = e.what();
    EXPECT_NE(w.find("'x'"), std::string::npos) << w;
    EXPECT_NE(w.find("index 1"), std::string::npos) << w;
  }
}

class Prepared : public ::testing::Test {
 protected:
  void SetUp() override {
    ModuleOptions o;
    o.use_cache = false;
    module_ = source_module(ctx_, doublify_src +
                                      "__global__ void log_dim(int *out, int scale, float f, complexd z){ "
                                      "out[0] = blockDim.x * scale; out[1] = blockDim.y; out[2] = (int)(f * 2.0f); "
                                      "out[3] = (int)creal(z); out[4] = (int)cimag(z); }",
                            o);
  }
  Context ctx_ = env_context();
  std::optional<CompiledModule> module_;
};

TEST_F(Prepared, DoublifyPreparedMatchesCall) {
  std::vector<float> in = test::random_f32(21, 16);
  KernelHandle k = get_function(*module_, "doublify");
  EXPECT_FALSE(k.prepared());
  k.prepare("P", Dim3(4, 4, 1));
  EXPECT_TRUE(k.prepared());
  DeviceAllocation a = mem_alloc(ctx_, 64);
  memcpy_htod(ctx_, a, in.data(), 64);
  k.prepared_call(Dim3(1, 1), {a});
  std::vector<float> prepared(16);
  memcpy_dtoh(ctx_, prepared.data(), a, 64);
  EXPECT_EQ(prepared, run_doublify(ctx_, *module_, in));
}

TEST_F(Prepared, Errors) {
  KernelHandle k = get_function(*module_, "doublify");
  DeviceAllocation a = mem_alloc(ctx_, 64);
  EXPECT_THROW(k.prepared_call(Dim3(1), {a}), StateError);
  EXPECT_THROW(k.prepare("i"), ArgumentError);
  EXPECT_THROW(k.prepare("PP"), ArgumentError);
  EXPECT_THROW(k.prepare("Z"), FormatError);
  EXPECT_FALSE(k.prepared());
  k.prepare("P", Dim3(16));
  EXPECT_THROW(k.prepared_call(Dim3(1), {a, 1}), ArgumentError);
  EXPECT_THROW(k.prepared_call(Dim3(1), {2.5}), ArgumentError);
}

TEST_F(Prepared, SecondPrepareWinsAndPerCallBlockOverride) {
  KernelHandle k = get_function(*module_, "log_dim");
  DeviceAllocation out = mem_alloc(ctx_, 5 * 4);
  auto read = [&] {
    std::vector<std::int32_t> v(5);
    memcpy_dtoh(ctx_, v.data(), out, 20);
    return v;
  };
  k.prepare("PifD", Dim3(8, 2));
  k.prepare("PifD", Dim3(32, 1));
  k.prepared_call(Dim3(1), {out, 3, 1.25, std::complex<double>(7, -2)});
  EXPECT_EQ(read(), (std::vector<std::int32_t>{96, 1, 2, 7, -2}));
  k.prepared_call(Dim3(1), {out, 1, 0.0f, 5}, std::nullopt, Dim3(4, 3));
  EXPECT_EQ(read(), (std::vector<std::int32_t>{4, 3, 0, 5, 0}));
  k.prepared_call(Dim3(1), {out, 1, 0.0f, 5});
  EXPECT_EQ(read()[0], 32);
}

TEST_F(Prepared, FormatMustMatchSignatureExactly) {
  KernelHandle k = get_function(*module_, "log_dim");
  EXPECT_THROW(k.prepare("PiFD"), ArgumentError);
  EXPECT_THROW(k.prepare("PIfD"), ArgumentError);
  EXPECT_NO_THROW(k.prepare("PifD"));
}

TEST(RawArg, Coercion) {
  EXPECT_EQ(RawArg(5).coerce(ArgTag::i32, 0), TaggedValue(std::int32_t{5}));
  EXPECT_EQ(RawArg(5).coerce(ArgTag::u32, 0), TaggedValue(std::uint32_t{5}));
  EXPECT_EQ(RawArg(5).coerce(ArgTag::f64, 0), TaggedValue(5.0));
  EXPECT_EQ(RawArg(5).coerce(ArgTag::c64, 0), TaggedValue(std::complex<float>(5, 0)));
  EXPECT_EQ(RawArg(std::uint64_t{0x1000}).coerce(ArgTag::ptr, 0), TaggedValue(DevicePtr(0x1000)));
  EXPECT_EQ(RawArg(1.5).coerce(ArgTag::f32, 0), TaggedValue(1.5f));
  EXPECT_EQ(RawArg(1.5f).coerce(ArgTag::c128, 0), TaggedValue(std::complex<double>(1.5, 0)));
  EXPECT_THROW(RawArg(-1).coerce(ArgTag::u32, 2), ArgumentError);
  EXPECT_THROW(RawArg(std::int64_t{1} << 40).coerce(ArgTag::i32, 0), ArgumentError);
  EXPECT_THROW(RawArg(1.5).coerce(ArgTag::i32, 0), ArgumentError);
  EXPECT_THROW(RawArg(std::complex<double>(1, 1)).coerce(ArgTag::f64, 0), ArgumentError);
  EXPECT_THROW(RawArg(DevicePtr(256)).coerce(ArgTag::i64, 0), ArgumentError);
  EXPECT_THROW(RawArg(1.0).coerce(ArgTag::ptr, 0), ArgumentError);
}

TEST(CacheClear, RemovesEntriesAndCounters) {
  TempDir dir;
  EXPECT_EQ(cache_clear(dir.path()), 0u);
  Context ctx = env_context();
  source_module(ctx, doublify_src, in_dir(dir));
  source_module(ctx, doublify_src + "\n", in_dir(dir));
  write_bytes(dir.path() / "unrelated.txt", "keep");
  EXPECT_EQ(cache_clear(dir.path()), 2u);
  CacheDirStats s = cache_dir_stats(dir.path());
  EXPECT_EQ(s.entries, 0u);
  EXPECT_EQ(s.hits + s.misses, 0u);
  EXPECT_TRUE(fs::exists(dir.path() / "unrelated.txt"));
  EXPECT_EQ(cache_clear(dir.path()), 0u);
  EXPECT_EQ(cache_clear(dir.path() / "missing"), 0u);
}

TEST(CacheDir, Defaults) {
  EXPECT_EQ(default_cache_dir(Environment{{"SIMT_CACHE_DIR", "/x/y"}}), fs::path("/x/y"));
  EXPECT_FALSE(default_cache_dir(Environment{}).empty());
}
