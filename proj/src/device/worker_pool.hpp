#ifndef SIMT_SRC_DEVICE_WORKER_POOL_HPP
#define SIMT_SRC_DEVICE_WORKER_POOL_HPP

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace simt::detail {

/// Fixed set of threads that run one job at a time. The calling thread
/// participates as worker 0.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned workers);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  unsigned size() const noexcept { return static_cast<unsigned>(threads_.size()) + 1; }

  /// Calls job(w) once on every worker w and returns when all are done.
  void run(const std::function<void(unsigned)>& job);

 private:
  void loop(unsigned index);

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  const std::function<void(unsigned)>* job_ = nullptr;
  std::uint64_t generation_ = 0;
  unsigned running_ = 0;
  bool stop_ = false;
};

}  // namespace simt::detail

#endif  // SIMT_SRC_DEVICE_WORKER_POOL_HPP
