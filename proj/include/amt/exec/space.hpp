#pragma once

#include <amt/errors.hpp>
#include <amt/parallel/algorithm.hpp>
#include <amt/parallel/policy.hpp>
#include <amt/task/future.hpp>
#include <amt/task/runtime.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace amt::exec {

/// Where a kernel runs: inline in the calling task (serial) or split into
/// exactly task_count tasks on the current runtime (task_pool).
class execution_space
{
  public:
    enum class kind_t
    {
        serial,
        task_pool
    };

    static execution_space serial() noexcept
    {
        return execution_space(kind_t::serial, 1);
    }

    static execution_space task_pool(std::size_t task_count)
    {
        if (task_count == 0)
            throw configuration_error("task_pool space needs at least one task");
        return execution_space(kind_t::task_pool, task_count);
    }

    kind_t kind() const noexcept
    {
        return kind_;
    }
    std::size_t task_count() const noexcept
    {
        return tasks_;
    }

    std::string name() const
    {
        return kind_ == kind_t::serial ? "serial"
                                       : "task_pool(" + std::to_string(tasks_) + ")";
    }

  private:
    execution_space(kind_t k, std::size_t n) noexcept
      : kind_(k)
      , tasks_(n)
    {
    }
    kind_t kind_;
    std::size_t tasks_;
};

inline constexpr std::size_t max_rank = 4;
using md_index = std::array<std::size_t, max_rank>;

/// Row-major extents of rank 1..4.
class md_extents
{
  public:
    md_extents(std::initializer_list<std::size_t> dims)
    {
        if (dims.size() == 0 || dims.size() > max_rank)
            throw configuration_error("rank must be between 1 and 4");
        rank_ = dims.size();
        dims_.fill(1);
        std::size_t k = 0;
        for (std::size_t d : dims)
            dims_[k++] = d;
    }

    std::size_t rank() const noexcept
    {
        return rank_;
    }
    std::size_t extent(std::size_t k) const noexcept
    {
        return k < rank_ ? dims_[k] : 1;
    }
    std::size_t size() const noexcept
    {
        std::size_t n = 1;
        for (std::size_t k = 0; k != rank_; ++k)
            n *= dims_[k];
        return n;
    }

    /// Unused trailing components are zero.
    md_index unravel(std::size_t flat) const noexcept
    {
        md_index idx{};
        for (std::size_t k = rank_; k-- > 0;)
        {
            idx[k] = flat % dims_[k];
            flat /= dims_[k];
        }
        return idx;
    }

    std::size_t ravel(md_index const& idx) const noexcept
    {
        std::size_t flat = 0;
        for (std::size_t k = 0; k != rank_; ++k)
            flat = flat * dims_[k] + idx[k];
        return flat;
    }

    bool contains(md_index const& idx) const noexcept
    {
        for (std::size_t k = 0; k != rank_; ++k)
            if (idx[k] >= dims_[k])
                return false;
        return true;
    }

    friend bool operator==(md_extents const&, md_extents const&) = default;

  private:
    std::array<std::size_t, max_rank> dims_{};
    std::size_t rank_ = 0;
};

/// Dense row-major array of doubles. Disjoint indices may be written
/// concurrently.
class grid_view
{
  public:
    explicit grid_view(md_extents ext, double fill = 0.0)
      : extents_(ext)
      , data_(ext.size(), fill)
    {
    }

    md_extents const& extents() const noexcept
    {
        return extents_;
    }
    std::size_t size() const noexcept
    {
        return data_.size();
    }

    template <typename... I>
    double& operator()(I... i) noexcept
    {
        return data_[extents_.ravel(md_index{static_cast<std::size_t>(i)...})];
    }
    template <typename... I>
    double operator()(I... i) const noexcept
    {
        return data_[extents_.ravel(md_index{static_cast<std::size_t>(i)...})];
    }

    double& operator[](md_index const& idx) noexcept
    {
        return data_[extents_.ravel(idx)];
    }
    double operator[](md_index const& idx) const noexcept
    {
        return data_[extents_.ravel(idx)];
    }

    /// Checked access; std::out_of_range outside the extents.
    double& at(md_index const& idx)
    {
        if (!extents_.contains(idx))
            throw std::out_of_range("grid_view index out of range");
        return data_[extents_.ravel(idx)];
    }
    double at(md_index const& idx) const
    {
        return const_cast<grid_view&>(*this).at(idx);
    }

    std::vector<double> const& data() const noexcept
    {
        return data_;
    }
    std::vector<double>& data() noexcept
    {
        return data_;
    }

    friend bool operator==(grid_view const& a, grid_view const& b)
    {
        return a.extents_ == b.extents_ && a.data_ == b.data_;
    }

  private:
    md_extents extents_;
    std::vector<double> data_;
};

namespace detail {
    template <typename Kernel>
    void run_flat(md_extents const& ext, index_range r, Kernel& kernel)
    {
        for (std::int64_t f = r.lo; f != r.hi; ++f)
            kernel(ext.unravel(static_cast<std::size_t>(f)));
    }

    inline future<void> collect(std::vector<future<void>> parts)
    {
        return spawn([parts = std::move(parts)]() mutable {
            amt::detail::settle_all(parts);
        });
    }
}    // namespace detail

/// Calls kernel(idx) once per multi-index of `ext`. Serial runs inline and
/// returns a settled future; task_pool splits the flat index range into
/// task_count contiguous pieces. A kernel fault settles the future with
/// aggregate_error. The kernel must outlive the returned future.
template <typename Kernel>
future<void> parallel_for_md(
    execution_space const& space, md_extents const& ext, Kernel& kernel)
{
    auto const total = static_cast<std::int64_t>(ext.size());
    if (space.kind() == execution_space::kind_t::serial)
    {
        try
        {
            detail::run_flat(ext, {0, total}, kernel);
            return make_ready_future();
        }
        catch (...)
        {
            amt::detail::rethrow_if_unwind();
            return make_exceptional_future<void>(std::make_exception_ptr(
                aggregate_error({std::current_exception()})));
        }
    }
    std::vector<future<void>> parts;
    for (index_range const& r : chunk_plan(0, total, space.task_count()))
        parts.push_back(spawn([&kernel, ext, r] { detail::run_flat(ext, r, kernel); }));
    return detail::collect(std::move(parts));
}

/// Rvalue kernels are kept alive by the returned future.
template <typename Kernel,
    typename = std::enable_if_t<!std::is_lvalue_reference_v<Kernel>>>
future<void> parallel_for_md(
    execution_space const& space, md_extents const& ext, Kernel&& kernel)
{
    auto owned = std::make_shared<std::decay_t<Kernel>>(std::move(kernel));
    auto f = parallel_for_md(space, ext, *owned);
    if (f.is_ready())
        return f;
    return f.then([owned] {});
}

/// Fixed partition of a reduction into `chunks` partial sums. The result of
/// parallel_reduce depends only on this plan, never on the space.
struct reduce_plan
{
    std::size_t chunks = 16;
};

/// Folds map(idx) over `ext`: sequential within each plan chunk, partials
/// combined into init in ascending chunk order. task_pool(m) runs m tasks,
/// each owning a contiguous group of chunks.
template <typename T, typename Map, typename Combine>
future<T> parallel_reduce(execution_space const& space, md_extents const& ext,
    Map map, Combine combine, T init, reduce_plan plan = {})
{
    if (plan.chunks == 0)
        throw configuration_error("reduce_plan needs at least one chunk");
    auto const chunks = std::make_shared<std::vector<index_range>>(
        chunk_plan(0, static_cast<std::int64_t>(ext.size()), plan.chunks));
    auto partials = std::make_shared<std::vector<std::optional<T>>>(plan.chunks);
    auto body = std::make_shared<std::pair<Map, Combine>>(std::move(map), std::move(combine));

    auto run_chunks = [chunks, partials, body, ext](index_range group) {
        auto flat_map = [&](std::int64_t f) {
            return body->first(ext.unravel(static_cast<std::size_t>(f)));
        };
        for (std::int64_t c = group.lo; c != group.hi; ++c)
            (*partials)[c] = reduce_chunk<T>((*chunks)[c], flat_map, body->second);
    };
    auto finish = [partials, body, init]() {
        T acc = init;
        for (auto const& p : *partials)
            if (p)
                acc = body->second(acc, *p);
        return acc;
    };

    auto const nchunks = static_cast<std::int64_t>(plan.chunks);
    if (space.kind() == execution_space::kind_t::serial)
    {
        try
        {
            run_chunks({0, nchunks});
            return make_ready_future(finish());
        }
        catch (...)
        {
            amt::detail::rethrow_if_unwind();
            return make_exceptional_future<T>(std::current_exception());
        }
    }
    std::vector<future<void>> parts;
    for (index_range const& g : chunk_plan(0, nchunks, space.task_count()))
        parts.push_back(spawn([run_chunks, g] { run_chunks(g); }));
    return detail::collect(std::move(parts)).then(finish);
}

}    // namespace amt::exec
