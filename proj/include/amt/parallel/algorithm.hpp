#pragma once

#include <amt/parallel/policy.hpp>
#include <amt/task/future.hpp>
#include <amt/task/runtime.hpp>

#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace amt {

/// Faults raised by more than one chunk of a parallel algorithm; what()
/// reports the first in chunk order.
class aggregate_error : public std::runtime_error
{
  public:
    explicit aggregate_error(std::vector<std::exception_ptr> errors)
      : std::runtime_error(first_message(errors))
      , errors_(std::move(errors))
    {
    }

    std::vector<std::exception_ptr> const& errors() const noexcept
    {
        return errors_;
    }

  private:
    static std::string first_message(std::vector<std::exception_ptr> const& es)
    {
        if (es.empty())
            return "aggregate_error";
        try
        {
            std::rethrow_exception(es.front());
        }
        catch (std::exception const& e)
        {
            return e.what();
        }
        catch (...)
        {
            return "unknown error";
        }
    }

    std::vector<std::exception_ptr> errors_;
};

namespace detail {
    /// Waits for every chunk; throws aggregate_error if any faulted.
    template <typename T>
    std::vector<T> settle_all(std::vector<future<T>>& fs)
    {
        std::vector<std::exception_ptr> errors;
        std::vector<T> values;
        values.reserve(fs.size());
        for (auto& f : fs)
        {
            try
            {
                values.push_back(f.get());
            }
            catch (...)
            {
                errors.push_back(std::current_exception());
            }
        }
        if (!errors.empty())
            throw aggregate_error(std::move(errors));
        return values;
    }

    inline void settle_all(std::vector<future<void>>& fs)
    {
        std::vector<std::exception_ptr> errors;
        for (auto& f : fs)
        {
            try
            {
                f.get();
            }
            catch (...)
            {
                errors.push_back(std::current_exception());
            }
        }
        if (!errors.empty())
            throw aggregate_error(std::move(errors));
    }
}    // namespace detail

/// Calls body(i) exactly once for every i in [lo, hi). The parallel policy
/// runs one task per chunk of chunk_plan(lo, hi, policy.chunk_count()).
template <typename Body>
void for_each(std::int64_t lo, std::int64_t hi, execution::policy const& policy,
    Body&& body)
{
    if (hi < lo)
        throw configuration_error("for_each: ill-formed range");
    if (!policy.is_parallel())
    {
        for (std::int64_t i = lo; i != hi; ++i)
            body(i);
        return;
    }
    auto const plan = chunk_plan(lo, hi, policy.chunk_count());
    std::vector<future<void>> tasks;
    tasks.reserve(plan.size());
    for (index_range const& r : plan)
    {
        if (r.empty())
            continue;
        tasks.push_back(spawn([r, &body] {
            for (std::int64_t i = r.lo; i != r.hi; ++i)
                body(i);
        }));
    }
    detail::settle_all(tasks);
}

/// Sequential fold of transform over one chunk; nullopt for an empty chunk.
template <typename T, typename Transform, typename Combine>
std::optional<T> reduce_chunk(
    index_range r, Transform& transform, Combine& combine)
{
    if (r.empty())
        return std::nullopt;
    T acc = transform(r.lo);
    for (std::int64_t i = r.lo + 1; i != r.hi; ++i)
        acc = combine(acc, transform(i));
    return acc;
}

/// Folds per-chunk partials into init in ascending chunk order. The result
/// depends only on the chunk plan, never on the number of workers.
template <typename T, typename Transform, typename Combine>
T transform_reduce(std::int64_t lo, std::int64_t hi,
    execution::policy const& policy, Transform&& transform, Combine&& combine,
    T init)
{
    if (hi < lo)
        throw configuration_error("transform_reduce: ill-formed range");
    auto const plan = chunk_plan(lo, hi, policy.chunk_count());
    std::vector<std::optional<T>> partials;
    if (!policy.is_parallel())
    {
        for (index_range const& r : plan)
            partials.push_back(reduce_chunk<T>(r, transform, combine));
    }
    else
    {
        std::vector<future<std::optional<T>>> tasks;
        tasks.reserve(plan.size());
        for (index_range const& r : plan)
            tasks.push_back(spawn([r, &transform, &combine] {
                return reduce_chunk<T>(r, transform, combine);
            }));
        partials = detail::settle_all(tasks);
    }
    T acc = std::move(init);
    for (auto& p : partials)
        if (p)
            acc = combine(acc, *p);
    return acc;
}

}    // namespace amt
