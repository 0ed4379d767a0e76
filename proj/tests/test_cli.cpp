#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cli/commands.hpp"
#include "simt/cli.hpp"
#include "simt/sarr.hpp"
#include "simt/source_module.hpp"
#include "support.hpp"

using namespace simt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome simtrt(std::vector<std::string> args) {
  args.insert(args.begin(), "simtrt");
  std::ostringstream out, err;
  int code = cli::cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

// Runs the installed binary in a child process; stderr is discarded.
Outcome subprocess(const std::string& env, const std::string& args) {
  std::string cmd = env + " " + SIMTRT_PATH + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, "", ""};
  std::string out;
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
  int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, ""};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

const std::string doublify = std::string(CORPUS_DIR) + "/doublify.cu";

HostArray sixteen() {
  std::vector<float> v(16);
  for (int k = 0; k < 16; ++k) v[k] = static_cast<float>(k) - 3.5f;
  return HostArray::from(Shape{4, 4}, v);
}

}  // namespace

TEST(Sarr, RoundTripEveryDtype) {
  std::vector<HostArray> arrays{
      HostArray::from(Shape{2, 3}, test::random_f32(1, 6)),
      HostArray::from(test::random_f64(2, 5)),
      HostArray::from(Shape{1, 2, 2}, test::random_i32(3, 4)),
      HostArray::from(std::vector<std::int64_t>{-1, std::int64_t{1} << 40}),
      HostArray::from(std::vector<std::complex<float>>{{1, -2}}),
      HostArray::from(Shape{}, std::vector<std::complex<double>>{{0.5, 3}}),
      HostArray::from(std::vector<float>{}),
  };
  for (const HostArray& a : arrays) {
    std::stringstream s;
    write_sarr(s, a);
    EXPECT_EQ(read_sarr(s), a) << to_string(a.dtype);
  }
}

TEST(Sarr, ExactLayout) {
  std::stringstream s;
  write_sarr(s, HostArray::from(Shape{2}, std::vector<std::int32_t>{1, -2}));
  const std::string want("SARR\x01\x02\x01\x02\0\0\0\0\0\0\0\x01\0\0\0\xfe\xff\xff\xff", 23);
  EXPECT_EQ(s.str(), want);
}

TEST(Sarr, Rejections) {
  std::stringstream good;
  write_sarr(good, HostArray::from(std::vector<float>{1, 2}));
  const std::string bytes = good.str();
  auto rejects = [](std::string b) {
    std::stringstream s(b);
    EXPECT_THROW(read_sarr(s), FormatError);
  };
  std::string magic = bytes, version = bytes, dtype = bytes;
  magic[0] = 'X';
  version[4] = 2;
  dtype[5] = 6;
  rejects(magic);
  rejects(version);
  rejects(dtype);
  rejects(bytes.substr(0, bytes.size() - 1));
  rejects(bytes.substr(0, 10));
  rejects(bytes + "x");
  rejects("");
  test::TempDir dir;
  EXPECT_THROW(load_sarr(dir.path() / "missing.sarr"), IoError);
  EXPECT_THROW(save_sarr(dir.path() / "no" / "such" / "dir.sarr", HostArray::from(std::vector<float>{1})), IoError);
}

TEST(Dim3Parse, Forms) {
  EXPECT_EQ(cli::parse_dim3("4", "grid").x, 4u);
  Dim3 d = cli::parse_dim3("4,2", "grid");
  EXPECT_EQ(d.x, 4u);
  EXPECT_EQ(d.y, 2u);
  EXPECT_EQ(d.z, 1u);
  EXPECT_EQ(cli::parse_dim3("1,2,3", "block").z, 3u);
  for (const char* bad : {"", "0", "1,2,3,4", "a", "4,", ",4", "-1", "4 ", "99999999999"}) {
    EXPECT_THROW(cli::parse_dim3(bad, "grid"), ArgumentError) << bad;
  }
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(cli::exit_code_for(CompileError("x", 1, 1, "m")), cli::exit_compile);
  EXPECT_EQ(cli::exit_code_for(InvalidLaunchConfig("m")), cli::exit_launch);
  EXPECT_EQ(cli::exit_code_for(OutOfBounds(0x100, "m")), cli::exit_launch);
  EXPECT_EQ(cli::exit_code_for(Trap("m")), cli::exit_launch);
  EXPECT_EQ(cli::exit_code_for(BarrierDivergence("m")), cli::exit_launch);
  EXPECT_EQ(cli::exit_code_for(ArgumentError("m")), cli::exit_usage);
  EXPECT_EQ(cli::exit_code_for(IoError("m")), cli::exit_usage);
  EXPECT_EQ(cli::exit_code_for(NotFound("m")), cli::exit_usage);
  EXPECT_EQ(cli::exit_code_for(std::runtime_error("m")), cli::exit_usage);
}

TEST(Run, DoublifyWritesResult) {
  test::TempDir dir;
  fs::path in = dir.path() / "in.sarr", out = dir.path() / "out.sarr", cache = dir.path() / "cache";
  save_sarr(in, sixteen());
  std::vector<std::string> args{"--cache-dir", cache.string(), "run", doublify, "--entry", "doublify",
                                "--block", "4,4", "--arg", "arr:" + in.string(), "--out", "0:" + out.string()};
  Outcome first = simtrt(args);
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_EQ(first.out, "ran doublify grid (1,1,1) block (4,4,1) (cache miss)\nwrote parameter 0 to " + out.string() + "\n");
  std::vector<float> want = sixteen().values<float>();
  for (float& v : want) v *= 2;
  EXPECT_EQ(load_sarr(out), HostArray::from(Shape{4, 4}, want));
  Outcome second = simtrt(args);
  EXPECT_EQ(second.code, 0);
  EXPECT_NE(second.out.find("(cache hit)"), std::string::npos);
  EXPECT_EQ(cache_dir_stats(cache).entries, 1u);
}

TEST(Run, ScalarArguments) {
  test::TempDir dir;
  write_text(dir.path() / "k.cu",
             "__global__ void fill(double *out, int a, unsigned int b, long long c, float d, double e)\n"
             "{ out[0] = a; out[1] = b; out[2] = c; out[3] = d; out[4] = e; }\n");
  fs::path buf = dir.path() / "buf.sarr";
  save_sarr(buf, HostArray::from(std::vector<double>(5, 0.0)));
  Outcome r = simtrt({"--cache-dir", (dir.path() / "c").string(), "run", (dir.path() / "k.cu").string(), "--entry", "fill",
                   "--arg", "arr:" + buf.string(), "--arg", "i32:-3", "--arg", "u32:4000000000", "--arg",
                   "i64:-9000000000", "--arg", "f32:0.5", "--arg", "f64:1e300", "--out", "0:" + buf.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_sarr(buf).values<double>(), (std::vector<double>{-3, 4e9, -9e9, 0.5, 1e300}));
}

TEST(Run, Failures) {
  test::TempDir dir;
  fs::path in = dir.path() / "in.sarr", small = dir.path() / "small.sarr";
  std::string cache = (dir.path() / "c").string();
  save_sarr(in, sixteen());
  save_sarr(small, HostArray::from(std::vector<float>{1, 2, 3, 4}));
  auto run = [&](std::vector<std::string> extra) {
    std::vector<std::string> args{"--cache-dir", cache, "run"};
    args.insert(args.end(), extra.begin(), extra.end());
    return simtrt(args);
  };

  Outcome missing_entry = run({doublify, "--entry", "nope", "--arg", "arr:" + in.string()});
  EXPECT_EQ(missing_entry.code, 3);
  EXPECT_NE(missing_entry.err.find("NotFound"), std::string::npos);

  Outcome oob = run({doublify, "--entry", "doublify", "--block", "4,4", "--arg", "arr:" + small.string()});
  EXPECT_EQ(oob.code, 2);
  EXPECT_NE(oob.err.find("out-of-bounds"), std::string::npos);
  EXPECT_NE(oob.err.find("address 0x"), std::string::npos);

  write_text(dir.path() / "bad.cu", "__global__ void k(float *a) { a[0] = ; }\n");
  Outcome compile = run({(dir.path() / "bad.cu").string(), "--entry", "k"});
  EXPECT_EQ(compile.code, 1);
  EXPECT_EQ(compile.err.rfind((dir.path() / "bad.cu").string() + ":1:", 0), 0u) << compile.err;

  EXPECT_EQ(run({doublify, "--entry", "doublify"}).code, 3);  // arity
  EXPECT_EQ(run({doublify, "--entry", "doublify", "--arg", "f32:1"}).code, 3);
  EXPECT_EQ(run({doublify, "--entry", "doublify", "--arg", "wat:1"}).code, 3);
  EXPECT_EQ(run({doublify, "--entry", "doublify", "--arg", "arr:" + in.string(), "--out", "1:x.sarr"}).code, 3);
  EXPECT_EQ(run({doublify, "--entry", "doublify", "--arg", "arr:/no/such.sarr"}).code, 3);
  EXPECT_EQ(run({"/no/such.cu", "--entry", "doublify"}).code, 3);
  EXPECT_EQ(run({doublify, "--entry", "doublify", "--block", "0", "--arg", "arr:" + in.string()}).code, 3);
  EXPECT_EQ(run({doublify, "--entry", "doublify", "--block", "2000", "--arg", "arr:" + in.string()}).code, 2);
  EXPECT_EQ(simtrt({"--workers", "0", "cache", "stats"}).code, 3);
  EXPECT_EQ(simtrt({"--schedule", "sideways", "cache", "stats"}).code, 3);
  EXPECT_EQ(simtrt({"frobnicate"}).code, 3);
  EXPECT_EQ(simtrt({}).code, 3);
}

TEST(Demo, EveryDemoPasses) {
  for (const std::string& name : cli::demo_names()) {
    Outcome r = simtrt({"demo", name});
    EXPECT_EQ(r.code, 0) << name << "\n" << r.out << r.err;
    EXPECT_NE(r.out.find("PASS " + name), std::string::npos) << r.out;
  }
  Outcome bad = simtrt({"demo", "nope"});
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.err.find("double4x4"), std::string::npos);
}

TEST(Demo, ExampleOutputs) {
  EXPECT_NE(simtrt({"demo", "dot"}).out.find("[1,2,3] . [4,5,6] = 32"), std::string::npos);
  Outcome scan = simtrt({"demo", "scan"});
  EXPECT_NE(scan.out.find("3 4 8 9 14"), std::string::npos) << scan.out;
  EXPECT_NE(scan.out.find("0 3 4 8 9"), std::string::npos) << scan.out;
}

TEST(Demo, CgFromFiles) {
  test::TempDir dir;
  write_text(dir.path() / "a.coo", "2 2 4\n0 0 4\n0 1 1\n1 0 1\n1 1 3\n");
  save_sarr(dir.path() / "b.sarr", HostArray::from(std::vector<double>{1, 2}));
  Outcome r = simtrt({"demo", "cg", "--matrix", (dir.path() / "a.coo").string(), "--rhs",
                   (dir.path() / "b.sarr").string(), "--tol", "1e-12"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  write_text(dir.path() / "bad.coo", "2 2 3\n0 0 1\n");
  EXPECT_EQ(simtrt({"demo", "cg", "--matrix", (dir.path() / "bad.coo").string()}).code, 3);
}

TEST(Cache, StatsAndClear) {
  test::TempDir dir;
  std::string cache = (dir.path() / "fresh").string();
  Outcome empty = simtrt({"--cache-dir", cache, "cache", "clear"});
  EXPECT_EQ(empty.code, 0);
  EXPECT_EQ(empty.out, "removed 0\n");
  Outcome stats = simtrt({"--cache-dir", cache, "cache", "stats"});
  EXPECT_EQ(stats.code, 0);
  EXPECT_NE(stats.out.find("entries 0"), std::string::npos);
  ASSERT_EQ(simtrt({"--cache-dir", cache, "demo", "axpy"}).code, 0);
  EXPECT_GE(cache_dir_stats(cache).entries, 1u);
  Outcome cleared = simtrt({"--cache-dir", cache, "cache", "clear"});
  EXPECT_NE(cleared.out, "removed 0\n");
  EXPECT_EQ(cache_dir_stats(cache).entries, 0u);
  EXPECT_EQ(simtrt({"--cache-dir", cache, "cache", "shrink"}).code, 3);
}

TEST(Bench, StructuralCounts) {
  test::TempDir dir;
  std::string cache = dir.path().string();
  auto row = [](const std::string& out, const std::string& variant) {
    std::istringstream in(out);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind(variant + " ", 0) == 0) {
        std::istringstream f(line);
        std::string name, ms, launches, allocations, temps;
        f >> name >> ms >> launches >> allocations >> temps;
        return launches + " " + allocations + " " + temps;
      }
    }
    return std::string("missing");
  };
  Outcome r = simtrt({"--cache-dir", cache, "bench", "elementwise-fusion", "--size", "1000", "--repeats", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(row(r.out, "unfused"), "2 2 1");
  EXPECT_EQ(row(r.out, "fused"), "1 1 0");
  Outcome zero = simtrt({"--cache-dir", cache, "bench", "elementwise-fusion", "--size", "0"});
  EXPECT_EQ(row(zero.out, "unfused"), "0 0 0");
  EXPECT_EQ(row(zero.out, "fused"), "0 0 0");
  Outcome tune = simtrt({"--cache-dir", cache, "bench", "autotune-block", "--size", "4000", "--repeats", "1"});
  ASSERT_EQ(tune.code, 0) << tune.err;
  EXPECT_NE(tune.out.find("winner block="), std::string::npos);
  EXPECT_EQ(simtrt({"--cache-dir", cache, "bench", "nothing"}).code, 3);
}

TEST(Subprocess, CacheIsSharedAcrossProcesses) {
  test::TempDir dir;
  fs::path in = dir.path() / "in.sarr", cache = dir.path() / "cache";
  save_sarr(in, sixteen());
  const std::string env = "SIMT_CACHE_DIR=" + cache.string();
  auto run = [&](const std::string& out) {
    return subprocess(env, "run " + doublify + " --entry doublify --block 4,4 --arg arr:" + in.string() +
                               " --out 0:" + (dir.path() / out).string());
  };
  Outcome a = run("a.sarr");
  ASSERT_EQ(a.code, 0);
  EXPECT_NE(a.out.find("(cache miss)"), std::string::npos);
  CacheDirStats s1 = cache_dir_stats(cache);
  EXPECT_EQ(s1.hits, 0u);
  EXPECT_EQ(s1.misses, 1u);
  Outcome b = run("b.sarr");
  ASSERT_EQ(b.code, 0);
  EXPECT_NE(b.out.find("(cache hit)"), std::string::npos);
  CacheDirStats s2 = cache_dir_stats(cache);
  EXPECT_EQ(s2.hits, 1u);
  EXPECT_EQ(s2.misses, 1u);
  EXPECT_EQ(s2.entries, 1u);
  EXPECT_EQ(read_bytes(dir.path() / "a.sarr"), read_bytes(dir.path() / "b.sarr"));
  Outcome stats = subprocess(env, "cache stats");
  EXPECT_EQ(stats.code, 0);
  EXPECT_NE(stats.out.find("hits 1"), std::string::npos) << stats.out;
}

TEST(Subprocess, OneEntryPerDistinctSource) {
  test::TempDir dir;
  fs::path cache = dir.path() / "cache";
  fs::path in = dir.path() / "in.sarr";
  save_sarr(in, sixteen());
  for (int variant = 0; variant < 3; ++variant) {
    fs::path src = dir.path() / ("k" + std::to_string(variant) + ".cu");
    write_text(src, "__global__ void k(float *a) { a[threadIdx.x] += " + std::to_string(variant) + "; }\n");
    for (int rep = 0; rep < 2; ++rep) {
      Outcome r = subprocess("", "--cache-dir " + cache.string() + " run " + src.string() +
                                     " --entry k --block 16 --arg arr:" + in.string());
      ASSERT_EQ(r.code, 0);
    }
  }
  EXPECT_EQ(cache_dir_stats(cache).entries, 3u);
  EXPECT_EQ(cache_dir_stats(cache).hits, 3u);
}

TEST(Subprocess, ExitCodesAndStreams) {
  test::TempDir dir;
  Outcome usage = subprocess("SIMT_CACHE_DIR=" + dir.path().string(), "run");
  EXPECT_EQ(usage.code, 3);
  EXPECT_EQ(usage.out, "");
  Outcome env_error = subprocess("SIMT_WORKERS=zero", "cache stats");
  EXPECT_EQ(env_error.code, 3);
  Outcome device = subprocess("SIMT_DEVICE=3 SIMT_CACHE_DIR=" + dir.path().string(), "demo dot");
  EXPECT_EQ(device.code, 3);
  Outcome second = subprocess("SIMT_DEVICE_COUNT=2 SIMT_DEVICE=1 SIMT_CACHE_DIR=" + dir.path().string(), "demo dot");
  EXPECT_EQ(second.code, 0);
}
