#pragma once

#include <amt/errors.hpp>
#include <amt/task/runtime.hpp>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace amt {

/// Half-open index interval [lo, hi).
struct index_range
{
    std::int64_t lo = 0;
    std::int64_t hi = 0;

    std::int64_t size() const noexcept
    {
        return hi > lo ? hi - lo : 0;
    }
    bool empty() const noexcept
    {
        return hi <= lo;
    }
    friend bool operator==(index_range const&, index_range const&) = default;
};

/// Splits [lo, hi) into `count` contiguous chunks in ascending order. Sizes
/// differ by at most one, the longer chunks first; chunks may be empty when
/// count exceeds the range length.
inline std::vector<index_range> chunk_plan(
    std::int64_t lo, std::int64_t hi, std::size_t count)
{
    if (count == 0)
        throw configuration_error("chunk count must be at least 1");
    if (hi < lo)
        throw configuration_error("ill-formed range: hi < lo");
    std::vector<index_range> plan;
    plan.reserve(count);
    auto const n = static_cast<std::uint64_t>(hi - lo);
    std::uint64_t const base = n / count;
    std::uint64_t const extra = n % count;
    std::int64_t at = lo;
    for (std::size_t c = 0; c != count; ++c)
    {
        auto const len = static_cast<std::int64_t>(base + (c < extra ? 1 : 0));
        plan.push_back({at, at + len});
        at += len;
    }
    return plan;
}

inline std::size_t default_chunk_count()
{
    runtime* rt = runtime::current();
    return 4 * (rt != nullptr ? rt->worker_count() : 1);
}

namespace execution {

    class policy
    {
      public:
        enum class kind_t
        {
            sequential,
            parallel
        };

        constexpr explicit policy(kind_t k, std::size_t chunks = 0) noexcept
          : kind_(k)
          , chunks_(chunks)
        {
        }

        constexpr kind_t kind() const noexcept
        {
            return kind_;
        }

        constexpr bool is_parallel() const noexcept
        {
            return kind_ == kind_t::parallel;
        }

        /// Fixed chunk count for the parallel policy.
        policy with_chunks(std::size_t chunks) const
        {
            if (chunks == 0)
                throw configuration_error("chunk_count must be at least 1");
            return policy(kind_, chunks);
        }

        /// Effective chunk count: 1 for sequential, the fixed count if set,
        /// otherwise 4 x the worker count of the current runtime.
        std::size_t chunk_count() const
        {
            if (kind_ == kind_t::sequential)
                return 1;
            return chunks_ != 0 ? chunks_ : default_chunk_count();
        }

      private:
        kind_t kind_;
        std::size_t chunks_;
    };

    inline constexpr policy seq{policy::kind_t::sequential};
    inline constexpr policy par{policy::kind_t::parallel};

}    // namespace execution

}    // namespace amt
