#include <amt/task/mutex.hpp>

#include <amt/errors.hpp>
#include <amt/task/detail/hooks.hpp>
#include <amt/task/runtime.hpp>

#include <condition_variable>
#include <memory>

namespace amt {

void mutex::lock()
{
    {
        std::lock_guard g(guard_);
        if (!locked_)
        {
            locked_ = true;
            owner_ = this_task::get_id();
            return;
        }
    }

    if (detail::current_task() != nullptr)
    {
        // Ownership is handed over by unlock() before we are resumed.
        detail::suspend_current(
            [](void* self, detail::task* t) {
                auto* m = static_cast<mutex*>(self);
                std::unique_lock g(m->guard_);
                if (!m->locked_)
                {
                    m->locked_ = true;
                    m->owner_ = detail::task_id(t);
                    g.unlock();
                    detail::resume(t);
                    return;
                }
                m->waiters_.push_back(
                    {detail::task_id(t), [t] { detail::resume(t); }});
            },
            this);
        return;
    }

    struct sync_state
    {
        std::mutex m;
        std::condition_variable cv;
        bool granted = false;
    };
    auto sync = std::make_shared<sync_state>();
    {
        std::lock_guard g(guard_);
        if (!locked_)
        {
            locked_ = true;
            owner_ = 0;
            return;
        }
        waiters_.push_back({0, [sync] {
                                std::lock_guard lk(sync->m);
                                sync->granted = true;
                                sync->cv.notify_all();
                            }});
    }
    std::unique_lock lk(sync->m);
    sync->cv.wait(lk, [&] { return sync->granted; });
}

bool mutex::try_lock()
{
    std::lock_guard g(guard_);
    if (locked_)
        return false;
    locked_ = true;
    owner_ = this_task::get_id();
    return true;
}

void mutex::unlock()
{
    std::unique_lock g(guard_);
    if (!locked_)
        throw usage_error("unlock of an unlocked amt::mutex");
    if (waiters_.empty())
    {
        locked_ = false;
        owner_ = 0;
        return;
    }
    waiter next = std::move(waiters_.front());
    waiters_.pop_front();
    owner_ = next.id;
    g.unlock();
    next.wake();
}

std::uint64_t mutex::owner() const
{
    std::lock_guard g(guard_);
    return owner_;
}

}    // namespace amt
