#ifndef SIMT_CLI_HPP
#define SIMT_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace simt::cli {

// Exit codes of the simtrt front end.
inline constexpr int exit_ok = 0;
inline constexpr int exit_compile = 1;
inline constexpr int exit_launch = 2;
inline constexpr int exit_usage = 3;

/// Runs one command line (args[0] is the program name). Human output goes
/// to `out`, diagnostics to `err`.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The exit code for an exception escaping a command.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace simt::cli

#endif  // SIMT_CLI_HPP
