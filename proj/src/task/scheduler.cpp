#include <amt/task/runtime.hpp>

#include <boost/context/fiber.hpp>
#include <boost/context/stack_context.hpp>

#include <sys/mman.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <mutex>
#include <new>
#include <random>
#include <thread>
#include <vector>

namespace ctx = boost::context;

namespace amt::detail {

namespace {

    /// 256 KiB task stacks with a guard page, recycled through a global cache
    /// so that spawning does not cost an mmap per task.
    class stack_pool
    {
      public:
        static constexpr std::size_t stack_size = 256 * 1024;
        static constexpr std::size_t max_cached = 256;

        static stack_pool& instance()
        {
            static stack_pool pool;
            return pool;
        }

        void* acquire()
        {
            {
                std::lock_guard lk(mutex_);
                if (!free_.empty())
                {
                    void* base = free_.back();
                    free_.pop_back();
                    return base;
                }
            }
            std::size_t const page = page_size();
            void* base = ::mmap(nullptr, stack_size + page,
                PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
            if (base == MAP_FAILED)
                throw std::bad_alloc();
            ::mprotect(base, page, PROT_NONE);
            return base;
        }

        void release(void* base)
        {
            {
                std::lock_guard lk(mutex_);
                if (free_.size() < max_cached)
                {
                    free_.push_back(base);
                    return;
                }
            }
            ::munmap(base, stack_size + page_size());
        }

        static std::size_t page_size()
        {
            static std::size_t const size =
                static_cast<std::size_t>(::sysconf(_SC_PAGESIZE));
            return size;
        }

        ~stack_pool()
        {
            for (void* base : free_)
                ::munmap(base, stack_size + page_size());
        }

      private:
        std::mutex mutex_;
        std::vector<void*> free_;
    };

    struct pooled_stack_allocator
    {
        ctx::stack_context allocate()
        {
            void* base = stack_pool::instance().acquire();
            ctx::stack_context sc;
            sc.size = stack_pool::stack_size;
            sc.sp = static_cast<char*>(base) + stack_pool::page_size() +
                stack_pool::stack_size;
            return sc;
        }

        void deallocate(ctx::stack_context& sc) noexcept
        {
            void* base = static_cast<char*>(sc.sp) - stack_pool::stack_size -
                stack_pool::page_size();
            stack_pool::instance().release(base);
        }
    };

    std::atomic<std::uint64_t> next_task_id{1};
    std::atomic<runtime*> default_runtime{nullptr};

}    // namespace

class scheduler;

struct task
{
    std::uint64_t id = next_task_id.fetch_add(1, std::memory_order_relaxed);
    scheduler* owner = nullptr;
    unique_function<void()> body;
    ctx::fiber context;
    ctx::fiber return_to;
    arm_fn arm = nullptr;
    void* arm_ctx = nullptr;
    bool started = false;
    bool finished = false;
};

struct worker
{
    scheduler* sched = nullptr;
    std::size_t index = 0;
    std::mutex mutex;
    std::deque<task*> queue;
    std::minstd_rand rng;
    task* running = nullptr;
    std::thread thread;
};

namespace {
    thread_local worker* tls_worker = nullptr;

    // Tasks can migrate between OS threads across a suspension, so no caller
    // may keep a cached address of the thread-local across a switch.
    [[gnu::noinline]] worker* this_worker() noexcept
    {
        return tls_worker;
    }
}    // namespace

class scheduler
{
  public:
    scheduler(runtime* owner, std::size_t n)
      : owner_(owner)
    {
        workers_.reserve(n);
        for (std::size_t i = 0; i != n; ++i)
        {
            auto w = std::make_unique<worker>();
            w->sched = this;
            w->index = i;
            w->rng.seed(static_cast<unsigned>(0x9e3779b9u * (i + 1)));
            workers_.push_back(std::move(w));
        }
        for (auto& w : workers_)
            w->thread = std::thread([this, p = w.get()] { worker_main(*p); });
    }

    ~scheduler()
    {
        shutdown();
    }

    runtime* owner() const noexcept
    {
        return owner_;
    }

    std::size_t size() const noexcept
    {
        return workers_.size();
    }

    std::size_t live() const noexcept
    {
        return live_.load(std::memory_order_acquire);
    }

    bool owns_current_thread() const noexcept
    {
        worker* w = this_worker();
        return w != nullptr && w->sched == this;
    }

    void post(unique_function<void()> body)
    {
        if (!accepting_.load(std::memory_order_acquire))
            throw rejected_error("runtime has been shut down");
        auto* t = new task;
        t->owner = this;
        t->body = std::move(body);
        live_.fetch_add(1, std::memory_order_acq_rel);
        enqueue(t, false);
    }

    /// Local pushes go to the head of the calling worker's deque (LIFO);
    /// external pushes and yields go to a tail.
    void enqueue(task* t, bool to_back)
    {
        worker* self = this_worker();
        worker* target = nullptr;
        if (self != nullptr && self->sched == this)
        {
            target = self;
        }
        else
        {
            target = workers_[round_robin_.fetch_add(1,
                                  std::memory_order_relaxed) %
                workers_.size()]
                         .get();
            to_back = true;
        }
        {
            std::lock_guard lk(target->mutex);
            if (to_back)
                target->queue.push_back(t);
            else
                target->queue.push_front(t);
        }
        queued_.fetch_add(1, std::memory_order_acq_rel);
        std::lock_guard lk(idle_mutex_);
        if (sleepers_ != 0)
            idle_cv_.notify_one();
    }

    void wait_idle()
    {
        if (owns_current_thread())
            throw usage_error("wait_idle called from a worker of the same runtime");
        std::unique_lock lk(drain_mutex_);
        drain_cv_.wait(lk, [this] { return live_.load() == 0; });
    }

    void shutdown()
    {
        std::lock_guard once(shutdown_mutex_);
        if (stopped_)
            return;
        wait_idle();
        accepting_.store(false, std::memory_order_release);
        {
            std::lock_guard lk(idle_mutex_);
            stop_ = true;
        }
        idle_cv_.notify_all();
        for (auto& w : workers_)
            w->thread.join();
        stopped_ = true;
    }

  private:
    void worker_main(worker& w)
    {
        tls_worker = &w;
        while (task* t = next_task(w))
            execute(w, t);
        tls_worker = nullptr;
    }

    task* pop_local(worker& w)
    {
        std::lock_guard lk(w.mutex);
        if (w.queue.empty())
            return nullptr;
        task* t = w.queue.front();
        w.queue.pop_front();
        queued_.fetch_sub(1, std::memory_order_acq_rel);
        return t;
    }

    task* steal(worker& thief)
    {
        std::size_t const n = workers_.size();
        if (n < 2)
            return nullptr;
        std::size_t const start = thief.rng() % n;
        for (std::size_t k = 0; k != n; ++k)
        {
            worker& victim = *workers_[(start + k) % n];
            if (&victim == &thief)
                continue;
            std::lock_guard lk(victim.mutex);
            if (victim.queue.empty())
                continue;
            task* t = victim.queue.back();
            victim.queue.pop_back();
            queued_.fetch_sub(1, std::memory_order_acq_rel);
            return t;
        }
        return nullptr;
    }

    task* next_task(worker& w)
    {
        for (;;)
        {
            if (task* t = pop_local(w))
                return t;
            if (task* t = steal(w))
                return t;
            std::unique_lock lk(idle_mutex_);
            if (queued_.load(std::memory_order_acquire) != 0)
                continue;
            if (stop_)
                return nullptr;
            ++sleepers_;
            idle_cv_.wait(lk, [this] {
                return queued_.load(std::memory_order_acquire) != 0 || stop_;
            });
            --sleepers_;
        }
    }

    static void run_body(task* t)
    {
        try
        {
            t->body();
        }
        catch (ctx::detail::forced_unwind const&)
        {
            throw;
        }
        catch (std::exception const& e)
        {
            std::fprintf(stderr, "amt: uncaught exception in task %llu: %s\n",
                static_cast<unsigned long long>(t->id), e.what());
        }
        catch (...)
        {
            std::fprintf(stderr, "amt: uncaught exception in task %llu\n",
                static_cast<unsigned long long>(t->id));
        }
        t->body = nullptr;
    }

    void execute(worker& w, task* t)
    {
        w.running = t;
        if (!t->started)
        {
            t->started = true;
            t->context = ctx::fiber(std::allocator_arg,
                pooled_stack_allocator{}, [t](ctx::fiber&& back) {
                    t->return_to = std::move(back);
                    run_body(t);
                    t->finished = true;
                    return std::move(t->return_to);
                });
        }
        t->context = std::move(t->context).resume();
        w.running = nullptr;

        if (t->finished)
        {
            delete t;
            if (live_.fetch_sub(1, std::memory_order_acq_rel) == 1)
            {
                std::lock_guard lk(drain_mutex_);
                drain_cv_.notify_all();
            }
            return;
        }
        arm_fn arm = t->arm;
        void* arm_ctx = t->arm_ctx;
        t->arm = nullptr;
        t->arm_ctx = nullptr;
        arm(arm_ctx, t);
    }

    runtime* owner_;
    std::vector<std::unique_ptr<worker>> workers_;
    std::atomic<std::size_t> queued_{0};
    std::atomic<std::size_t> live_{0};
    std::atomic<std::size_t> round_robin_{0};
    std::atomic<bool> accepting_{true};

    std::mutex idle_mutex_;
    std::condition_variable idle_cv_;
    std::size_t sleepers_ = 0;
    bool stop_ = false;

    std::mutex drain_mutex_;
    std::condition_variable drain_cv_;

    std::mutex shutdown_mutex_;
    bool stopped_ = false;
};

task* current_task() noexcept
{
    worker* w = this_worker();
    return w != nullptr ? w->running : nullptr;
}

void suspend_current(arm_fn arm, void* ctx_ptr)
{
    task* t = current_task();
    if (t == nullptr)
        throw usage_error("suspend_current called outside a task");
    t->arm = arm;
    t->arm_ctx = ctx_ptr;
    t->return_to = std::move(t->return_to).resume();
}

void resume(task* t)
{
    t->owner->enqueue(t, false);
}

std::uint64_t task_id(task const* t) noexcept
{
    return t->id;
}

void rethrow_if_unwind()
{
    try
    {
        throw;
    }
    catch (ctx::detail::forced_unwind const&)
    {
        throw;
    }
    catch (...)
    {
    }
}

void post_to(runtime* rt, unique_function<void()> body)
{
    rt->post(std::move(body));
}

runtime* current_runtime_or_throw()
{
    runtime* rt = runtime::current();
    if (rt == nullptr)
        throw rejected_error("no runtime is running");
    return rt;
}

}    // namespace amt::detail

namespace amt {

runtime::runtime(std::size_t worker_count)
{
    if (worker_count == 0)
        throw configuration_error("worker count must be at least 1");
    impl_ = std::make_unique<detail::scheduler>(this, worker_count);
    runtime* expected = nullptr;
    detail::default_runtime.compare_exchange_strong(expected, this);
}

runtime::~runtime()
{
    impl_->shutdown();
    runtime* expected = this;
    detail::default_runtime.compare_exchange_strong(expected, nullptr);
}

std::size_t runtime::worker_count() const noexcept
{
    return impl_->size();
}

void runtime::post(unique_function<void()> body)
{
    impl_->post(std::move(body));
}

void runtime::wait_idle()
{
    impl_->wait_idle();
}

void runtime::shutdown()
{
    impl_->shutdown();
    runtime* expected = this;
    detail::default_runtime.compare_exchange_strong(expected, nullptr);
}

std::size_t runtime::live_tasks() const noexcept
{
    return impl_->live();
}

runtime* runtime::current() noexcept
{
    if (detail::worker* w = detail::this_worker())
        return w->sched->owner();
    return detail::default_runtime.load(std::memory_order_acquire);
}

bool runtime::on_worker_thread() const noexcept
{
    return impl_->owns_current_thread();
}

run_status run_with_workers(std::size_t n, unique_function<void()> root)
{
    if (n == 0)
        throw configuration_error("run_with_workers: n must be at least 1");
    runtime rt(n);
    auto done = rt.spawn(std::move(root));
    rt.wait_idle();
    run_status status;
    try
    {
        done.get();
    }
    catch (std::exception const& e)
    {
        status.code = 1;
        status.message = e.what();
        status.error = std::current_exception();
    }
    catch (...)
    {
        status.code = 1;
        status.message = "unknown error";
        status.error = std::current_exception();
    }
    rt.shutdown();
    return status;
}

namespace this_task {
    std::uint64_t get_id() noexcept
    {
        detail::task* t = detail::current_task();
        return t != nullptr ? t->id : 0;
    }

    void yield()
    {
        if (detail::current_task() == nullptr)
            return;
        detail::suspend_current(
            [](void*, detail::task* t) { t->owner->enqueue(t, true); },
            nullptr);
    }
}    // namespace this_task

}    // namespace amt
