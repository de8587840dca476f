#pragma once

#include <amt/bench/maclaurin.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace amt::bench {

/// Operation count measured for n = 10^9; other n scale linearly.
inline constexpr double reference_flops = 100000028581.0;
inline constexpr double reference_terms = 1e9;

double flops_basis(std::int64_t n) noexcept;

struct bench_result
{
    paradigm how = paradigm::futures;
    std::size_t cores = 1;
    std::size_t repeats = 1;
    double time_min = 0;
    double time_median = 0;    // lower median
    double time_max = 0;
    double flops_basis = 0;
    double value = 0;          // the computed sum, identical across runs

    double flops() const noexcept
    {
        return flops_basis / time_median;
    }
};

/// Monotonic clock in seconds; injectable for deterministic tests.
using clock_fn = std::function<double()>;

/// Seconds from the calibrated default timestamp counter.
double timebase_seconds();

struct suite_options
{
    maclaurin_params params;
    std::vector<paradigm> paradigms{paradigm::futures};
    std::vector<std::size_t> cores{1};
    std::size_t repeats = 10;
    std::size_t chunks = default_chunks;
    clock_fn clock = timebase_seconds;
};

/// Lower median: element (size - 1) / 2 of the sorted samples.
double lower_median(std::vector<double> samples);

/// For every paradigm (outer) and core count (inner, as given) runs the
/// series `repeats` times on a fresh pool of that many workers and records
/// min / lower median / max wall time. Throws configuration_error for zero
/// repeats, no paradigms, no core counts or a zero core count.
std::vector<bench_result> run_suite(suite_options const& opts);

class io_error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr char const* csv_header = "cores,time_min_s,time_median_s,time_max_s";

/// CSV text for one paradigm's results, rows ascending by cores.
std::string format_csv(std::vector<bench_result> const& rows);

/// Writes one file per paradigm, `<dir>/<suite>_<paradigm>.csv`, and
/// returns the paths in paradigm order of first appearance. Throws
/// std::invalid_argument for empty results and io_error when a file cannot
/// be written.
std::vector<std::filesystem::path> emit_csv(std::vector<bench_result> const& results,
    std::filesystem::path const& dir, std::string const& suite);

struct csv_row
{
    std::size_t cores = 0;
    double time_min = 0;
    double time_median = 0;
    double time_max = 0;
};

/// Parses a file written by emit_csv; throws io_error on a bad header or row.
std::vector<csv_row> parse_csv(std::string const& text);
std::vector<csv_row> read_csv(std::filesystem::path const& file);

}    // namespace amt::bench
