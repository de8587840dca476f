#pragma once

#include <amt/errors.hpp>
#include <amt/task/detail/hooks.hpp>
#include <amt/task/unique_function.hpp>

#include <cstddef>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

namespace amt {

class runtime;

namespace detail {

    /// Posts a body to `rt`; declared here so the continuation machinery does
    /// not need the full runtime definition.
    void post_to(runtime* rt, unique_function<void()> body);
    runtime* current_runtime_or_throw();

    /// Readiness and continuation bookkeeping shared by all value types.
    /// Transitions pending -> ready | faulted exactly once.
    class state_base
    {
      public:
        enum class status : unsigned char
        {
            pending,
            ready,
            faulted
        };

        state_base() = default;
        state_base(state_base const&) = delete;
        state_base& operator=(state_base const&) = delete;
        virtual ~state_base() = default;

        bool is_ready() const
        {
            std::lock_guard lk(mutex_);
            return status_ != status::pending;
        }

        bool has_error() const
        {
            std::lock_guard lk(mutex_);
            return status_ == status::faulted;
        }

        /// Runs `cb` once the state settles; inline if it already has.
        void on_settled(unique_function<void()> cb);

        /// Suspends the calling task (or blocks a non-worker thread) until
        /// the state settles.
        void wait();

        /// Single-consumer guard for get/then.
        void consume();

        void set_exception(std::exception_ptr e);

        std::exception_ptr error() const
        {
            std::lock_guard lk(mutex_);
            return error_;
        }

      protected:
        /// Caller holds no lock; `store` runs under the state lock.
        template <typename Store>
        void settle(status s, Store&& store)
        {
            std::vector<unique_function<void()>> pending;
            {
                std::lock_guard lk(mutex_);
                if (status_ != status::pending)
                    throw usage_error("future state already satisfied");
                store();
                status_ = s;
                pending.swap(callbacks_);
            }
            for (auto& cb : pending)
                cb();
        }

        mutable std::mutex mutex_;
        status status_ = status::pending;
        std::exception_ptr error_;
        bool consumed_ = false;
        std::vector<unique_function<void()>> callbacks_;
    };

    struct unit
    {
    };

    template <typename T>
    using storage_t = std::conditional_t<std::is_void_v<T>, unit, T>;

    template <typename T>
    class shared_state final : public state_base
    {
      public:
        void set_value(storage_t<T> v)
        {
            settle(status::ready, [&] { value_.emplace(std::move(v)); });
        }

        /// Moves the value out; rethrows the stored error.
        storage_t<T> take()
        {
            std::lock_guard lk(mutex_);
            if (status_ == status::faulted)
                std::rethrow_exception(error_);
            return std::move(*value_);
        }

      private:
        std::optional<storage_t<T>> value_;
    };

}    // namespace detail

template <typename T>
class future;

template <typename T>
class promise
{
  public:
    promise()
      : state_(std::make_shared<detail::shared_state<T>>())
    {
    }

    future<T> get_future()
    {
        if (retrieved_)
            throw usage_error("promise future already retrieved");
        retrieved_ = true;
        return future<T>(state_);
    }

    template <typename U = T,
        typename = std::enable_if_t<!std::is_void_v<U>>>
    void set_value(U v)
    {
        state_->set_value(std::move(v));
    }

    template <typename U = T, typename = std::enable_if_t<std::is_void_v<U>>>
    void set_value()
    {
        state_->set_value(detail::unit{});
    }

    void set_exception(std::exception_ptr e)
    {
        state_->set_exception(std::move(e));
    }

  private:
    std::shared_ptr<detail::shared_state<T>> state_;
    bool retrieved_ = false;
};

namespace detail {
    template <typename K, typename T>
    struct continuation_result
    {
        using type = std::invoke_result_t<K, T>;
    };
    template <typename K>
    struct continuation_result<K, void>
    {
        using type = std::invoke_result_t<K>;
    };

    /// Invokes f (with arg unless void) and stores the outcome in `out`.
    template <typename R, typename F, typename... A>
    void fulfil(shared_state<R>& out, F& f, A&&... arg)
    {
        try
        {
            if constexpr (std::is_void_v<R>)
            {
                f(std::forward<A>(arg)...);
                out.set_value(unit{});
            }
            else
            {
                out.set_value(f(std::forward<A>(arg)...));
            }
        }
        catch (...)
        {
            rethrow_if_unwind();
            out.set_exception(std::current_exception());
        }
    }
}    // namespace detail

/// One-shot value slot. Consumed by exactly one of get() or then().
template <typename T>
class future
{
  public:
    using value_type = T;

    future() = default;
    explicit future(std::shared_ptr<detail::shared_state<T>> s)
      : state_(std::move(s))
    {
    }

    bool valid() const noexcept
    {
        return state_ != nullptr;
    }

    bool is_ready() const
    {
        check_valid();
        return state_->is_ready();
    }

    bool has_exception() const
    {
        check_valid();
        return state_->has_error();
    }

    /// Blocks until ready. From a task this suspends the task; the worker
    /// keeps executing other tasks.
    T get()
    {
        check_valid();
        state_->consume();
        state_->wait();
        if constexpr (std::is_void_v<T>)
            state_->take();
        else
            return state_->take();
    }

    /// Waits for readiness without consuming.
    void wait() const
    {
        check_valid();
        state_->wait();
    }

    /// Attaches k; it runs as a new task once this future is ready. A fault
    /// propagates to the returned future without calling k.
    template <typename K>
    auto then(K&& k) -> future<typename detail::continuation_result<
        std::decay_t<K>, T>::type>
    {
        using R =
            typename detail::continuation_result<std::decay_t<K>, T>::type;
        check_valid();
        state_->consume();
        runtime* rt = detail::current_runtime_or_throw();
        auto out = std::make_shared<detail::shared_state<R>>();
        auto in = state_;
        in->on_settled([rt, in, out, k = std::forward<K>(k)]() mutable {
            if (in->has_error())
            {
                out->set_exception(in->error());
                return;
            }
            try
            {
                detail::post_to(rt,
                    [in = std::move(in), out, k = std::move(k)]() mutable {
                        if constexpr (std::is_void_v<T>)
                            detail::fulfil(*out, k);
                        else
                            detail::fulfil(*out, k, in->take());
                    });
            }
            catch (...)
            {
                out->set_exception(std::current_exception());
            }
        });
        return future<R>(std::move(out));
    }

    /// Access for combinators; does not consume.
    std::shared_ptr<detail::shared_state<T>> const& state() const noexcept
    {
        return state_;
    }

  private:
    void check_valid() const
    {
        if (!state_)
            throw usage_error("operation on an empty future");
    }

    std::shared_ptr<detail::shared_state<T>> state_;
};

template <typename T>
future<std::decay_t<T>> make_ready_future(T&& v)
{
    auto s = std::make_shared<detail::shared_state<std::decay_t<T>>>();
    s->set_value(std::forward<T>(v));
    return future<std::decay_t<T>>(std::move(s));
}

inline future<void> make_ready_future()
{
    auto s = std::make_shared<detail::shared_state<void>>();
    s->set_value(detail::unit{});
    return future<void>(std::move(s));
}

template <typename T>
future<T> make_exceptional_future(std::exception_ptr e)
{
    auto s = std::make_shared<detail::shared_state<T>>();
    s->set_exception(std::move(e));
    return future<T>(std::move(s));
}

namespace detail {
    template <typename T>
    struct when_all_frame
    {
        explicit when_all_frame(std::vector<future<T>> in)
          : inputs(std::move(in))
          , remaining(inputs.size())
        {
        }
        std::vector<future<T>> inputs;
        std::mutex mutex;
        std::size_t remaining;
    };
}    // namespace detail

/// Ready once every input has settled. Values keep input order; if any
/// input faulted, the result carries the first fault in input order.
template <typename T>
auto when_all(std::vector<future<T>> futures)
    -> future<std::conditional_t<std::is_void_v<T>, void, std::vector<T>>>
{
    using R = std::conditional_t<std::is_void_v<T>, void, std::vector<T>>;
    auto out = std::make_shared<detail::shared_state<R>>();
    for (auto& f : futures)
    {
        if (!f.valid())
            throw usage_error("when_all over an empty future");
        f.state()->consume();
    }
    if (futures.empty())
    {
        out->set_value(detail::storage_t<R>{});
        return future<R>(std::move(out));
    }

    auto frame =
        std::make_shared<detail::when_all_frame<T>>(std::move(futures));
    auto finish = [frame, out] {
        for (auto& f : frame->inputs)
        {
            if (f.state()->has_error())
            {
                out->set_exception(f.state()->error());
                return;
            }
        }
        if constexpr (std::is_void_v<T>)
        {
            out->set_value(detail::unit{});
        }
        else
        {
            std::vector<T> values;
            values.reserve(frame->inputs.size());
            for (auto& f : frame->inputs)
                values.push_back(f.state()->take());
            out->set_value(std::move(values));
        }
    };
    for (auto& f : frame->inputs)
    {
        f.state()->on_settled([frame, finish]() mutable {
            bool last = false;
            {
                std::lock_guard lk(frame->mutex);
                last = --frame->remaining == 0;
            }
            if (last)
                finish();
        });
    }
    return future<R>(std::move(out));
}

}    // namespace amt
