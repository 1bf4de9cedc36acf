#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace weakmfg {

/// Fixed block size used by every deterministic reduction in the library.
/// Partial sums are formed per block in index order and then combined in
/// block order, so the result never depends on how blocks were scheduled.
inline constexpr std::size_t kReductionBlock = 2048;

/// Small persistent worker pool. `for_blocks` runs `fn(block)` for every
/// block index in [0, n_blocks) and returns once all of them are done. The
/// calling thread participates, so a pool with one worker runs inline.
class Executor {
 public:
  explicit Executor(unsigned workers = 1) : workers_(std::max(1u, workers)) {
    for (unsigned i = 1; i < workers_; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  ~Executor() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
      ++generation_;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  unsigned workers() const { return workers_; }

  void for_blocks(std::size_t n_blocks, const std::function<void(std::size_t)>& fn) {
    if (n_blocks == 0) return;
    if (workers_ == 1 || n_blocks == 1) {
      for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
      return;
    }
    {
      std::lock_guard lock(mutex_);
      job_ = &fn;
      n_blocks_ = n_blocks;
      next_.store(0);
      pending_ = workers_ - 1;
      ++generation_;
    }
    wake_.notify_all();
    drain();
    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

  /// Splits [0, n) into contiguous ranges of `grain` indices.
  void for_range(std::size_t n, std::size_t grain,
                 const std::function<void(std::size_t, std::size_t)>& fn) {
    grain = std::max<std::size_t>(1, grain);
    const std::size_t blocks = (n + grain - 1) / grain;
    for_blocks(blocks, [&](std::size_t b) {
      const std::size_t lo = b * grain;
      fn(lo, std::min(n, lo + grain));
    });
  }

 private:
  void drain() {
    for (;;) {
      const std::size_t b = next_.fetch_add(1);
      if (b >= n_blocks_) break;
      (*job_)(b);
    }
  }

  void worker_loop() {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stopping_) return;
      }
      drain();
      {
        std::lock_guard lock(mutex_);
        --pending_;
      }
      done_.notify_one();
    }
  }

  unsigned workers_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t n_blocks_ = 0;
  std::atomic<std::size_t> next_{0};
  unsigned pending_ = 0;
  std::size_t generation_ = 0;
  bool stopping_ = false;
};

/// Process-wide default executor; single-threaded unless reconfigured.
inline Executor& default_executor(unsigned reconfigure = 0) {
  static std::unique_ptr<Executor> instance = std::make_unique<Executor>(1);
  if (reconfigure != 0 && reconfigure != instance->workers()) {
    instance = std::make_unique<Executor>(reconfigure);
  }
  return *instance;
}

/// Sum of term(i) for i in [0, n) with a fixed block tree.
template <class Term>
double deterministic_sum(std::size_t n, Term&& term, Executor& ex = default_executor()) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(blocks, 0.0);
  ex.for_blocks(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kReductionBlock;
    const std::size_t hi = std::min(n, lo + kReductionBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[b] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

/// Max of term(i) over [0, n); returns `init` for empty ranges.
template <class Term>
double deterministic_max(std::size_t n, Term&& term, double init = 0.0,
                         Executor& ex = default_executor()) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(blocks, init);
  ex.for_blocks(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kReductionBlock;
    const std::size_t hi = std::min(n, lo + kReductionBlock);
    double s = init;
    for (std::size_t i = lo; i < hi; ++i) s = std::max(s, term(i));
    partial[b] = s;
  });
  double total = init;
  for (double p : partial) total = std::max(total, p);
  return total;
}

}  // namespace weakmfg
