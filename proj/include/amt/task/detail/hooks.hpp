#pragma once

#include <cstdint>

namespace amt::detail {

struct task;

/// Task running on the calling thread, or nullptr on non-worker threads and
/// on a worker's own scheduling context.
task* current_task() noexcept;

using arm_fn = void (*)(void* ctx, task* suspended);

/// Switch the current task out. After the switch has completed, the worker
/// calls arm(ctx, task) from its scheduling context; arm must arrange for
/// resume(task) to be called exactly once. Must be called from a task.
void suspend_current(arm_fn arm, void* ctx);

/// Make a suspended task runnable again on its runtime.
void resume(task* t);

std::uint64_t task_id(task const* t) noexcept;

/// Inside a catch block: rethrows the fiber-unwinding exception (which must
/// never be swallowed), otherwise returns.
void rethrow_if_unwind();

}    // namespace amt::detail
