#ifndef SIMT_SRC_DEVICE_VM_HPP
#define SIMT_SRC_DEVICE_VM_HPP

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <utility>
#include <vector>

#include "device/bytecode.hpp"
#include "device/worker_pool.hpp"
#include "simt/device.hpp"

namespace simt::detail {

/// Shared memory is addressed in its own window, above every arena address.
inline constexpr std::uint64_t shared_window = std::uint64_t{1} << 62;

/// Read-only view of global memory for the duration of one launch.
struct GlobalMemory {
  std::byte* arena = nullptr;
  std::uint64_t capacity = 0;
  const std::map<std::uint64_t, std::uint64_t>* live = nullptr;  // base -> size
  const std::deque<std::pair<std::uint64_t, std::uint64_t>>* released = nullptr;
};

struct LaunchPlan {
  const Program* program = nullptr;
  const EntryInfo* entry = nullptr;
  Dim3 grid;
  Dim3 block;
  std::uint32_t dynamic_shared = 0;
  std::vector<Slot> args;
  ScheduleMode mode = ScheduleMode::deterministic;
  std::uint64_t seed = 0;
  bool debug = false;
};

/// Interprets every block of the launch and returns the block count.
/// Throws the LaunchError of the lowest-numbered failing block; blocks not
/// yet started when a failure is seen are skipped.
std::uint64_t execute(const LaunchPlan& plan, const GlobalMemory& memory, WorkerPool& pool);

std::string hex_address(std::uint64_t v);

/// Describes `address` relative to the live and recently released
/// allocations, for fault messages.
std::string describe_address(const GlobalMemory& memory, std::uint64_t address, std::uint64_t size);

}  // namespace simt::detail

#endif  // SIMT_SRC_DEVICE_VM_HPP
