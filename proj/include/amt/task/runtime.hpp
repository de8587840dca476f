#pragma once

#include <amt/errors.hpp>
#include <amt/task/future.hpp>
#include <amt/task/unique_function.hpp>

#include <cstddef>
#include <cstdint>
#include <exception>
#include <memory>
#include <string>
#include <type_traits>
#include <utility>

namespace amt {

namespace detail {
    class scheduler;
}

/// Fixed-size pool of workers executing suspendable tasks.
///
/// Each worker owns a deque; it pushes and pops at the head, idle workers
/// steal one task from the tail of a randomly chosen victim. A task that waits
/// on a future or a contended amt::mutex is switched out and its worker moves
/// on to other work.
class runtime
{
  public:
    explicit runtime(std::size_t worker_count);
    ~runtime();

    runtime(runtime const&) = delete;
    runtime& operator=(runtime const&) = delete;

    std::size_t worker_count() const noexcept;

    /// Queue a fire-and-forget task. Throws rejected_error after shutdown().
    void post(unique_function<void()> body);

    template <typename F>
    auto spawn(F&& f) -> future<std::invoke_result_t<std::decay_t<F>&>>
    {
        using R = std::invoke_result_t<std::decay_t<F>&>;
        auto state = std::make_shared<detail::shared_state<R>>();
        post([state, f = std::forward<F>(f)]() mutable {
            detail::fulfil(*state, f);
        });
        return future<R>(std::move(state));
    }

    /// Block the calling (non-worker) thread until no task is live.
    void wait_idle();

    /// Drain every reachable task, then stop and join the workers.
    /// Idempotent; later post/spawn calls throw rejected_error.
    void shutdown();

    /// Number of tasks created and not yet finished (suspended ones included).
    std::size_t live_tasks() const noexcept;

    /// The runtime owning the calling worker thread; otherwise the default
    /// runtime (the oldest live one), or nullptr.
    static runtime* current() noexcept;

    bool on_worker_thread() const noexcept;

  private:
    std::unique_ptr<detail::scheduler> impl_;
};

/// Spawn on runtime::current(); rejected_error if there is none.
template <typename F>
auto spawn(F&& f)
{
    return detail::current_runtime_or_throw()->spawn(std::forward<F>(f));
}

/// Alias matching the hpx::async spelling.
template <typename F>
auto async(F&& f)
{
    return spawn(std::forward<F>(f));
}

struct run_status
{
    int code = 0;    // 0 ok, nonzero: root faulted
    std::string message;
    std::exception_ptr error;

    bool ok() const noexcept
    {
        return code == 0;
    }
};

/// Runs `root` as a task on a fresh pool of n workers and returns once root
/// and every task reachable from it have finished.
/// Throws configuration_error for n == 0.
run_status run_with_workers(std::size_t n, unique_function<void()> root);

namespace this_task {
    /// Id of the running task; 0 outside tasks.
    std::uint64_t get_id() noexcept;

    /// Re-queue the running task behind the worker's pending work. No-op
    /// outside tasks.
    void yield();
}    // namespace this_task

}    // namespace amt
