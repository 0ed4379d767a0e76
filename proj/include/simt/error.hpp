#ifndef SIMT_ERROR_HPP
#define SIMT_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace simt {

enum class ErrorKind {
  compile,
  init,
  argument,
  invalid_launch_config,
  out_of_bounds,
  misaligned_access,
  barrier_divergence,
  trap,
  memory,
  not_found,
  state,
  format,
  shape,
  dtype,
  substitution,
  tune,
  index,
  io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base of every error raised by the runtime. Errors are reported as
/// exceptions; `kind()` allows dispatch without RTTI.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Lexical, syntactic or type error in kernel source. `what()` is formatted
/// as `origin:line:col: message`.
class CompileError : public Error {
 public:
  CompileError(std::string origin, int line, int column, std::string message);

  const std::string& origin() const noexcept { return origin_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string origin_;
  int line_;
  int column_;
  std::string message_;
};

#define SIMT_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& message) : Error(Kind, message) {} \
  }

SIMT_DEFINE_ERROR(InitError, ErrorKind::init);
SIMT_DEFINE_ERROR(ArgumentError, ErrorKind::argument);
SIMT_DEFINE_ERROR(InvalidLaunchConfig, ErrorKind::invalid_launch_config);
SIMT_DEFINE_ERROR(MemoryError, ErrorKind::memory);
SIMT_DEFINE_ERROR(NotFound, ErrorKind::not_found);
SIMT_DEFINE_ERROR(StateError, ErrorKind::state);
SIMT_DEFINE_ERROR(FormatError, ErrorKind::format);
SIMT_DEFINE_ERROR(ShapeError, ErrorKind::shape);
SIMT_DEFINE_ERROR(DTypeError, ErrorKind::dtype);
SIMT_DEFINE_ERROR(SubstitutionError, ErrorKind::substitution);
SIMT_DEFINE_ERROR(TuneError, ErrorKind::tune);
SIMT_DEFINE_ERROR(IndexError, ErrorKind::index);
SIMT_DEFINE_ERROR(IoError, ErrorKind::io);

#undef SIMT_DEFINE_ERROR

/// Errors raised while a kernel executes. They are recorded on the stream
/// and rethrown by the next synchronization.
class LaunchError : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public LaunchError {
 public:
  OutOfBounds(std::uint64_t address, const std::string& message)
      : LaunchError(ErrorKind::out_of_bounds, message), address_(address) {}

  std::uint64_t address() const noexcept { return address_; }

 private:
  std::uint64_t address_;
};

class MisalignedAccess : public LaunchError {
 public:
  MisalignedAccess(std::uint64_t address, const std::string& message)
      : LaunchError(ErrorKind::misaligned_access, message), address_(address) {}

  std::uint64_t address() const noexcept { return address_; }

 private:
  std::uint64_t address_;
};

class BarrierDivergence : public LaunchError {
 public:
  explicit BarrierDivergence(const std::string& message)
      : LaunchError(ErrorKind::barrier_divergence, message) {}
};

class Trap : public LaunchError {
 public:
  explicit Trap(const std::string& message) : LaunchError(ErrorKind::trap, message) {}
};

}  // namespace simt

#endif  // SIMT_ERROR_HPP
