#include <amt/bench/maclaurin.hpp>
#include <amt/errors.hpp>
#include <amt/parallel.hpp>
#include <amt/task.hpp>

#include <cmath>
#include <string>

namespace amt::bench {

std::string_view to_string(paradigm p) noexcept
{
    switch (p)
    {
    case paradigm::futures:
        return "futures";
    case paradigm::for_each:
        return "for_each";
    case paradigm::sender:
        return "sender";
    }
    return "unknown";
}

paradigm parse_paradigm(std::string_view name)
{
    for (paradigm p : all_paradigms())
        if (name == to_string(p))
            return p;
    throw configuration_error("unknown paradigm '" + std::string(name) +
        "' (expected futures, for_each or sender)");
}

std::vector<paradigm> parse_paradigm_list(std::string_view list)
{
    std::vector<paradigm> out;
    while (true)
    {
        auto comma = list.find(',');
        auto item = list.substr(0, comma);
        if (item.empty())
            throw configuration_error("empty entry in paradigm list");
        out.push_back(parse_paradigm(item));
        if (comma == std::string_view::npos)
            break;
        list = list.substr(comma + 1);
    }
    return out;
}

std::vector<paradigm> const& all_paradigms() noexcept
{
    static std::vector<paradigm> const all{paradigm::futures, paradigm::for_each, paradigm::sender};
    return all;
}

void maclaurin_params::validate() const
{
    if (!(std::abs(x) < 1.0))
        throw domain_error("ln(1+x) series needs |x| < 1, got x = " + std::to_string(x));
    if (n < 1)
        throw configuration_error("term count n must be at least 1");
}

double maclaurin_term(double x, std::int64_t k) noexcept
{
    double t = std::pow(x, static_cast<double>(k)) / static_cast<double>(k);
    return (k & 1) != 0 ? t : -t;
}

double maclaurin_partial(double x, index_range r) noexcept
{
    double sum = 0.0;
    for (std::int64_t k = r.lo; k < r.hi; ++k)
        sum += maclaurin_term(x, k);
    return sum;
}

namespace {

    double fold(std::vector<double> const& partials)
    {
        double sum = 0.0;
        for (double v : partials)
            sum += v;
        return sum;
    }

}    // namespace

double maclaurin_ln1p(maclaurin_params const& p, paradigm how, std::size_t chunks)
{
    p.validate();
    auto const plan = chunk_plan(1, p.n + 1, chunks);
    std::vector<double> partials(plan.size(), 0.0);
    double const x = p.x;
    switch (how)
    {
    case paradigm::futures: {
        std::vector<future<double>> fs;
        fs.reserve(plan.size());
        for (index_range const& r : plan)
            fs.push_back(spawn([x, r] { return maclaurin_partial(x, r); }));
        partials = when_all(std::move(fs)).get();
        break;
    }
    case paradigm::for_each:
        for_each(0, static_cast<std::int64_t>(plan.size()), execution::par.with_chunks(plan.size()),
            [&](std::int64_t c) { partials[c] = maclaurin_partial(x, plan[c]); });
        break;
    case paradigm::sender:
        ex::sync_wait(ex::just() |
            ex::bulk(
                plan.size(), [&](std::size_t c) { partials[c] = maclaurin_partial(x, plan[c]); },
                plan.size()));
        break;
    }
    return fold(partials);
}

double maclaurin_serial(maclaurin_params const& p, std::size_t chunks)
{
    p.validate();
    auto const plan = chunk_plan(1, p.n + 1, chunks);
    std::vector<double> partials;
    partials.reserve(plan.size());
    for (index_range const& r : plan)
        partials.push_back(maclaurin_partial(p.x, r));
    return fold(partials);
}

}    // namespace amt::bench
