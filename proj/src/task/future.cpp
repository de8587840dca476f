#include <amt/task/future.hpp>

#include <condition_variable>

namespace amt::detail {

namespace {
    struct blocking_wait
    {
        std::mutex mutex;
        std::condition_variable cv;
        bool done = false;
    };
}    // namespace

void state_base::on_settled(unique_function<void()> cb)
{
    {
        std::lock_guard lk(mutex_);
        if (status_ == status::pending)
        {
            callbacks_.push_back(std::move(cb));
            return;
        }
    }
    cb();
}

void state_base::consume()
{
    std::lock_guard lk(mutex_);
    if (consumed_)
        throw usage_error("future already consumed by get() or then()");
    consumed_ = true;
}

void state_base::set_exception(std::exception_ptr e)
{
    settle(status::faulted, [&] { error_ = std::move(e); });
}

void state_base::wait()
{
    if (is_ready())
        return;
    if (current_task() != nullptr)
    {
        suspend_current(
            [](void* self, task* t) {
                static_cast<state_base*>(self)->on_settled(
                    [t] { resume(t); });
            },
            this);
        return;
    }
    auto sync = std::make_shared<blocking_wait>();
    on_settled([sync] {
        std::lock_guard lk(sync->mutex);
        sync->done = true;
        sync->cv.notify_all();
    });
    std::unique_lock lk(sync->mutex);
    sync->cv.wait(lk, [&] { return sync->done; });
}

}    // namespace amt::detail
