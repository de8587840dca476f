#pragma once

#include <amt/errors.hpp>
#include <amt/parallel/algorithm.hpp>
#include <amt/parallel/policy.hpp>
#include <amt/task/future.hpp>
#include <amt/task/runtime.hpp>
#include <amt/task/unique_function.hpp>

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

// Minimal sender/receiver pipelines: just(v) | then(f) | bulk(n, f), driven
// by sync_wait. A sender describes work; nothing runs until it is started,
// and it can be started exactly once.
namespace amt::ex {

template <typename T>
class sender
{
  public:
    using value_type = T;

    explicit sender(unique_function<future<T>()> start)
      : state_(std::make_shared<state>(std::move(start)))
    {
    }

    /// Launches the pipeline; usage_error on a second start.
    future<T> start() const
    {
        if (state_->started.exchange(true))
            throw usage_error("sender started more than once");
        return state_->start();
    }

    bool started() const noexcept
    {
        return state_->started.load();
    }

  private:
    struct state
    {
        explicit state(unique_function<future<T>()> s)
          : start(std::move(s))
        {
        }
        unique_function<future<T>()> start;
        std::atomic<bool> started{false};
    };
    std::shared_ptr<state> state_;
};

template <typename V>
sender<std::decay_t<V>> just(V&& v)
{
    return sender<std::decay_t<V>>(
        [v = std::forward<V>(v)]() mutable { return make_ready_future(std::move(v)); });
}

inline sender<void> just()
{
    return sender<void>([] { return make_ready_future(); });
}

template <typename F>
struct then_adaptor
{
    F fn;
};

/// Applies fn to the upstream value on the pool.
template <typename F>
then_adaptor<std::decay_t<F>> then(F&& fn)
{
    return {std::forward<F>(fn)};
}

template <typename T, typename F>
auto operator|(sender<T> upstream, then_adaptor<F> a)
{
    using R = typename detail::continuation_result<F, T>::type;
    return sender<R>([up = std::move(upstream), fn = std::move(a.fn)]() mutable {
        return up.start().then(std::move(fn));
    });
}

template <typename F>
struct bulk_adaptor
{
    std::size_t shape;
    F fn;
    std::size_t chunks;    // 0: default chunking
};

/// Invokes fn(i) (or fn(i, value&)) for each i in [0, shape), then passes the
/// upstream value on unchanged. Indices are grouped into contiguous chunks,
/// one task per chunk.
template <typename F>
bulk_adaptor<std::decay_t<F>> bulk(std::size_t shape, F&& fn, std::size_t chunks = 0)
{
    return {shape, std::forward<F>(fn), chunks};
}

template <typename T, typename F>
sender<T> operator|(sender<T> upstream, bulk_adaptor<F> a)
{
    auto fn = std::make_shared<F>(std::move(a.fn));
    std::size_t const shape = a.shape;
    std::size_t const chunks = a.chunks;
    auto run = [fn, shape, chunks](auto* value) {
        std::size_t const count =
            chunks != 0 ? chunks : std::max<std::size_t>(1, std::min(shape, default_chunk_count()));
        auto const plan = chunk_plan(0, static_cast<std::int64_t>(shape), count);
        std::vector<future<void>> tasks;
        for (index_range const& r : plan)
        {
            if (r.empty())
                continue;
            tasks.push_back(spawn([r, fn, value] {
                for (std::int64_t i = r.lo; i != r.hi; ++i)
                {
                    if constexpr (std::is_void_v<T>)
                        (*fn)(static_cast<std::size_t>(i));
                    else
                        (*fn)(static_cast<std::size_t>(i), *value);
                }
            }));
        }
        amt::detail::settle_all(tasks);
    };
    if constexpr (std::is_void_v<T>)
    {
        return sender<void>([up = std::move(upstream), run]() mutable {
            return up.start().then([run]() mutable { run(static_cast<void*>(nullptr)); });
        });
    }
    else
    {
        return sender<T>([up = std::move(upstream), run]() mutable {
            return up.start().then([run](T value) mutable {
                run(&value);
                return value;
            });
        });
    }
}

/// Starts s and waits for its value; from a task the wait suspends.
template <typename T>
T sync_wait(sender<T> const& s)
{
    if constexpr (std::is_void_v<T>)
        s.start().get();
    else
        return s.start().get();
}

/// Per-index fan-out stage for compose().
template <typename T>
struct fanout
{
    std::size_t shape = 0;
    std::function<void(std::size_t, T&)> fn;
};

/// just(source) | then(fns[0]) | ... | then(fns[k-1]) [| bulk(fan.shape, fan.fn)].
template <typename T>
sender<T> compose(T source,
    std::vector<std::function<std::type_identity_t<T>(std::type_identity_t<T>)>> const& fns,
    std::optional<fanout<std::type_identity_t<T>>> fan = std::nullopt)
{
    sender<T> s = just(std::move(source));
    for (auto const& f : fns)
        s = std::move(s) | then(f);
    if (fan)
        s = std::move(s) | bulk(fan->shape, fan->fn);
    return s;
}

}    // namespace amt::ex
