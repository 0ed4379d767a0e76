#ifndef SIMT_SRC_CLI_COMMANDS_HPP
#define SIMT_SRC_CLI_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "simt/device.hpp"
#include "simt/source_module.hpp"

namespace simt::cli {

/// Flags shared by every subcommand. Unset flags defer to the SIMT_*
/// environment.
struct Globals {
  std::optional<std::string> cache_dir;
  std::optional<unsigned> workers;
  std::optional<std::string> schedule;
  std::optional<std::uint64_t> seed;
  std::optional<int> device;

  Environment environment() const;
  Context context() const;
  ModuleOptions module_options(std::string origin) const;
  std::uint64_t data_seed() const;
};

struct RunSpec {
  std::string kernel_file;
  std::string entry;
  std::string grid = "1";
  std::string block = "1";
  std::vector<std::string> args;
  std::vector<std::string> outs;
  std::uint32_t shared_bytes = 0;
  bool no_extern_c = false;
};

struct DemoSpec {
  std::string name;
  std::optional<std::string> matrix;  // COO text file for cg
  std::optional<std::string> rhs;     // .sarr right-hand side for cg
  double tol = 1e-10;
  int max_iter = 1000;
};

struct BenchSpec {
  std::string target;
  std::uint64_t size = 1000000;
  int repeats = 3;
};

int cmd_run(const Globals& g, const RunSpec& spec, std::ostream& out, std::ostream& err);
int cmd_demo(const Globals& g, const DemoSpec& spec, std::ostream& out, std::ostream& err);
int cmd_cache(const Globals& g, const std::string& action, std::ostream& out, std::ostream& err);
int cmd_bench(const Globals& g, const BenchSpec& spec, std::ostream& out, std::ostream& err);

const std::vector<std::string>& demo_names();

/// 1 to 3 comma-separated positive extents; missing extents are 1.
Dim3 parse_dim3(const std::string& text, const char* what);

}  // namespace simt::cli

#endif  // SIMT_SRC_CLI_COMMANDS_HPP
