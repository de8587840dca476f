#pragma once

#include <memory>
#include <type_traits>
#include <utility>

namespace amt {

template <typename Signature>
class unique_function;

/// Move-only type-erased callable; std::function requires copyable targets,
/// which rules out closures that own futures or promises.
template <typename R, typename... Args>
class unique_function<R(Args...)>
{
    struct callable_base
    {
        virtual ~callable_base() = default;
        virtual R invoke(Args... args) = 0;
    };

    template <typename F>
    struct callable final : callable_base
    {
        explicit callable(F&& f)
          : fn(std::move(f))
        {
        }
        R invoke(Args... args) override
        {
            return fn(std::forward<Args>(args)...);
        }
        F fn;
    };

    std::unique_ptr<callable_base> impl_;

  public:
    unique_function() = default;
    unique_function(std::nullptr_t) {}

    template <typename F,
        typename = std::enable_if_t<
            !std::is_same_v<std::decay_t<F>, unique_function> &&
            std::is_invocable_r_v<R, std::decay_t<F>&, Args...>>>
    unique_function(F&& f)
      : impl_(std::make_unique<callable<std::decay_t<F>>>(
            std::decay_t<F>(std::forward<F>(f))))
    {
    }

    unique_function(unique_function&&) noexcept = default;
    unique_function& operator=(unique_function&&) noexcept = default;

    explicit operator bool() const noexcept
    {
        return impl_ != nullptr;
    }

    R operator()(Args... args)
    {
        return impl_->invoke(std::forward<Args>(args)...);
    }
};

}    // namespace amt
