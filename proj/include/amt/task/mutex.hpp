#pragma once

#include <amt/task/unique_function.hpp>

#include <cstdint>
#include <deque>
#include <mutex>

namespace amt {

/// Mutex that suspends a contending task instead of blocking its worker.
/// Waiters are served FIFO; unlock hands ownership directly to the next one.
/// Usable from non-worker threads as well, which block.
class mutex
{
  public:
    mutex() = default;
    mutex(mutex const&) = delete;
    mutex& operator=(mutex const&) = delete;

    void lock();
    bool try_lock();
    void unlock();

    /// Task id of the holder (0 when unlocked or held by a non-task thread).
    std::uint64_t owner() const;

  private:
    mutable std::mutex guard_;
    bool locked_ = false;
    std::uint64_t owner_ = 0;
    struct waiter
    {
        std::uint64_t id;
        unique_function<void()> wake;
    };
    std::deque<waiter> waiters_;
};

}    // namespace amt
