#pragma once

#include <amt/parallel/policy.hpp>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace amt::bench {

/// Parallel programming style used to evaluate the series.
enum class paradigm
{
    futures,     // one spawned future per chunk, joined with when_all
    for_each,    // parallel for_each over the chunk indices
    sender       // just() | bulk(chunks) | sync_wait
};

std::string_view to_string(paradigm p) noexcept;
/// Throws configuration_error for an unknown name.
paradigm parse_paradigm(std::string_view name);
/// Comma-separated list, e.g. "futures,for_each". Rejects empty entries.
std::vector<paradigm> parse_paradigm_list(std::string_view list);

std::vector<paradigm> const& all_paradigms() noexcept;

/// ln(1+x) = sum_{k=1..n} (-1)^(k+1) x^k / k, valid for |x| < 1.
struct maclaurin_params
{
    double x = 0.999999;
    std::int64_t n = 1000000000;

    /// Throws amt::domain_error for |x| >= 1 (or non-finite x) and
    /// configuration_error for n < 1.
    void validate() const;
};

/// Default number of chunks; fixed so the sum does not depend on the
/// number of workers.
inline constexpr std::size_t default_chunks = 64;

/// The k-th series term (-1)^(k+1) x^k / k.
double maclaurin_term(double x, std::int64_t k) noexcept;

/// Sequential sum of the terms k in [r.lo, r.hi).
double maclaurin_partial(double x, index_range r) noexcept;

/// Sums the series over chunk_plan(1, n + 1, chunks); chunk partials are
/// added in ascending chunk order, so every paradigm and worker count gives
/// the same bits. Runs on the current runtime.
double maclaurin_ln1p(maclaurin_params const& p, paradigm how, std::size_t chunks = default_chunks);

/// Single-threaded evaluation of the same chunk plan.
double maclaurin_serial(maclaurin_params const& p, std::size_t chunks = default_chunks);

}    // namespace amt::bench
