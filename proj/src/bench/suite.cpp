#include <amt/bench/suite.hpp>
#include <amt/errors.hpp>
#include <amt/task.hpp>
#include <amt/timebase.hpp>

#include <algorithm>
#include <cassert>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace amt::bench {

double flops_basis(std::int64_t n) noexcept
{
    return reference_flops * (static_cast<double>(n) / reference_terms);
}

double timebase_seconds()
{
    static timebase::ticks const origin = timebase::timestamp();
    return timebase::elapsed_seconds(
        origin, timebase::timestamp(), timebase::default_calibration());
}

double lower_median(std::vector<double> samples)
{
    if (samples.empty())
        throw configuration_error("median of no samples");
    std::sort(samples.begin(), samples.end());
    return samples[(samples.size() - 1) / 2];
}

std::vector<bench_result> run_suite(suite_options const& opts)
{
    if (opts.repeats == 0)
        throw configuration_error("repeats must be at least 1");
    if (opts.paradigms.empty())
        throw configuration_error("no paradigms selected");
    if (opts.cores.empty())
        throw configuration_error("no core counts selected");
    for (auto c : opts.cores)
        if (c == 0)
            throw configuration_error("core counts must be positive");
    if (!opts.clock)
        throw configuration_error("no clock");
    opts.params.validate();

    std::vector<bench_result> out;
    for (paradigm how : opts.paradigms)
    {
        for (std::size_t cores : opts.cores)
        {
            std::vector<double> times;
            double value = 0;
            auto status = run_with_workers(cores, [&] {
                for (std::size_t r = 0; r != opts.repeats; ++r)
                {
                    double t0 = opts.clock();
                    value = maclaurin_ln1p(opts.params, how, opts.chunks);
                    double t1 = opts.clock();
                    times.push_back(t1 - t0);
                }
            });
            if (!status.ok())
                std::rethrow_exception(status.error);

            bench_result res;
            res.how = how;
            res.cores = cores;
            res.repeats = opts.repeats;
            res.time_min = *std::min_element(times.begin(), times.end());
            res.time_max = *std::max_element(times.begin(), times.end());
            res.time_median = lower_median(times);
            assert(res.time_min <= res.time_median && res.time_median <= res.time_max);
            res.flops_basis = flops_basis(opts.params.n);
            res.value = value;
            out.push_back(res);
        }
    }
    return out;
}

namespace {

    std::string fixed6(double v)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return buf;
    }

}    // namespace

std::string format_csv(std::vector<bench_result> const& rows)
{
    auto sorted = rows;
    std::stable_sort(sorted.begin(), sorted.end(),
        [](bench_result const& a, bench_result const& b) { return a.cores < b.cores; });
    std::string out = std::string(csv_header) + "\n";
    for (auto const& r : sorted)
        out += std::to_string(r.cores) + "," + fixed6(r.time_min) + "," + fixed6(r.time_median) +
            "," + fixed6(r.time_max) + "\n";
    return out;
}

std::vector<std::filesystem::path> emit_csv(std::vector<bench_result> const& results,
    std::filesystem::path const& dir, std::string const& suite)
{
    if (results.empty())
        throw std::invalid_argument("no results to write");
    std::vector<paradigm> order;
    std::map<paradigm, std::vector<bench_result>> groups;
    for (auto const& r : results)
    {
        if (groups.find(r.how) == groups.end())
            order.push_back(r.how);
        groups[r.how].push_back(r);
    }
    std::vector<std::filesystem::path> files;
    for (paradigm how : order)
    {
        auto path = dir / (suite + "_" + std::string(to_string(how)) + ".csv");
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f)
            throw io_error("cannot write '" + path.string() + "'");
        f << format_csv(groups[how]);
        f.close();
        if (!f)
            throw io_error("failed writing '" + path.string() + "'");
        files.push_back(path);
    }
    return files;
}

std::vector<csv_row> parse_csv(std::string const& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != csv_header)
        throw io_error("missing CSV header");
    std::vector<csv_row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line))
    {
        ++line_no;
        csv_row r;
        char tail = 0;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf%c", &r.cores, &r.time_min, &r.time_median,
                &r.time_max, &tail) != 4)
            throw io_error("malformed CSV row " + std::to_string(line_no));
        rows.push_back(r);
    }
    return rows;
}

std::vector<csv_row> read_csv(std::filesystem::path const& file)
{
    std::ifstream f(file, std::ios::binary);
    if (!f)
        throw io_error("cannot read '" + file.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

}    // namespace amt::bench
